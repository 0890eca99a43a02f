"""Rectangular grids, scalar fields and second-order difference operators.

The grid is periodic in y and closed by even reflection in x: ghost nodes
satisfy f(-1) = f(1) and f(nx+1) = f(nx-1). Under this closure the
second-difference operators are diagonalised by a type-I cosine transform in
x and a Fourier transform in y, and they are self-adjoint for the
trapezoid-in-x / rectangle-in-y quadrature used throughout.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


class SpecMismatch(ValueError):
    """Two fields living on different grids were combined."""


@dataclass(frozen=True)
class DomainSpec:
    """Omega = (-a, a) x (-b, b) sampled with nx+1 x-nodes and ny periodic y-nodes."""

    a: float
    b: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("half-widths must be positive")
        for n in (self.nx, self.ny):
            if n < 8 or n % 2:
                raise ValueError("node counts must be even and >= 8")

    @property
    def hx(self) -> float:
        return 2.0 * self.a / self.nx

    @property
    def hy(self) -> float:
        return 2.0 * self.b / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny)

    @property
    def area(self) -> float:
        return 4.0 * self.a * self.b

    @cached_property
    def x(self) -> np.ndarray:
        return -self.a + self.hx * np.arange(self.nx + 1)

    @cached_property
    def y(self) -> np.ndarray:
        return -self.b + self.hy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def weights(self) -> np.ndarray:
        wx = np.ones(self.nx + 1)
        wx[0] = wx[-1] = 0.5
        return (wx * self.hx)[:, None] * np.full(self.ny, self.hy)[None, :]

    # Symbols of -dxx, -dyy and -laplacian on the cosine x Fourier basis,
    # laid out like the output of `to_spectral`.
    @cached_property
    def kx2(self) -> np.ndarray:
        k = np.arange(self.nx + 1)
        return (4.0 / self.hx**2) * np.sin(np.pi * k / (2 * self.nx)) ** 2

    @cached_property
    def ky2(self) -> np.ndarray:
        l = np.arange(self.ny // 2 + 1)
        return (4.0 / self.hy**2) * np.sin(np.pi * l / self.ny) ** 2

    @cached_property
    def mu2(self) -> np.ndarray:
        return self.kx2[:, None] + self.ky2[None, :]

    @cached_property
    def inv_mu4(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = 1.0 / self.mu2**2
        out[0, 0] = 0.0
        return out

    @cached_property
    def x_gram(self) -> np.ndarray:
        """Symbol of the X inner product: mu^4 + kx^4 / mu^4 (zero on the constant mode)."""
        return self.mu2**2 + self.kx2[:, None] ** 2 * self.inv_mu4

    @cached_property
    def inv_x_gram(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = 1.0 / self.x_gram
        out[0, 0] = 0.0
        return out

    def label(self) -> str:
        return f"{self.a:g}x{self.b:g}"


class SymmetryClass(enum.Enum):
    NONE = "none"
    EVEN_XY = "even_xy"


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on a DomainSpec. Treat as immutable."""

    spec: DomainSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.spec.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, spec: DomainSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def from_function(cls, spec: DomainSpec, fn) -> "ScalarField":
        X, Y = spec.mesh()
        return cls(spec, np.broadcast_to(fn(X, Y), spec.shape).astype(float))

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.spec != self.spec:
                raise SpecMismatch(f"{self.spec} vs {other.spec}")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.spec, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.spec, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return ScalarField(self.spec, self.values / c)

    def __neg__(self):
        return ScalarField(self.spec, -self.values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def _check(f: ScalarField, g: ScalarField) -> None:
    if f.spec != g.spec:
        raise SpecMismatch(f"{f.spec} vs {g.spec}")


# --- raw array kernels -----------------------------------------------------
# These work on (nx+1, ny) arrays; the ScalarField wrappers below are the
# public surface, the kernels are reused by the solvers for speed.


def _pad_x(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v[1:2], v, v[-2:-1]], axis=0)


def dx_arr(v: np.ndarray, hx: float) -> np.ndarray:
    p = _pad_x(v)
    return (p[2:] - p[:-2]) / (2 * hx)


def dxx_arr(v: np.ndarray, hx: float) -> np.ndarray:
    p = _pad_x(v)
    return (p[2:] - 2 * v + p[:-2]) / hx**2


def dy_arr(v: np.ndarray, hy: float) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * hy)


def dyy_arr(v: np.ndarray, hy: float) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - 2 * v + np.roll(v, 1, axis=1)) / hy**2


def dx_adjoint_arr(v: np.ndarray, hx: float) -> np.ndarray:
    """Adjoint of `dx_arr` for the trapezoid-weighted inner product."""
    g = v.copy()
    g[0] = g[-1] = 0.0  # dx output is identically zero on the end columns
    out = np.zeros_like(v)
    out[1:] += g[:-1]
    out[:-1] -= g[1:]
    out /= 2 * hx
    out[0] *= 2.0
    out[-1] *= 2.0
    return out


def dxy_arr(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    return dy_arr(dx_arr(v, hx), hy)


def dxy_adjoint_arr(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    # dy is skew-adjoint under periodic closure
    return -dx_adjoint_arr(dy_arr(v, hy), hx)


def laplacian_arr(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    return dxx_arr(v, hx) + dyy_arr(v, hy)


def dxy_cell_arr(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Mixed difference D+x D+y v on cell centres, shape (nx, ny)."""
    d = np.diff(v, axis=0)
    return (np.roll(d, -1, axis=1) - d) / (hx * hy)


def cell_to_node_arr(c: np.ndarray) -> np.ndarray:
    """Average a cell-centred field onto the four surrounding nodes.

    Cells outside [-a, a] are mirror images (even reflection), so a boundary
    node averages its two interior cells.
    """
    cy = 0.5 * (c + np.roll(c, 1, axis=1))  # cell (i+1/2, j) -> average over j -/+ 1/2
    out = np.empty((c.shape[0] + 1, c.shape[1]))
    out[1:-1] = 0.5 * (cy[1:] + cy[:-1])
    out[0] = cy[0]
    out[-1] = cy[-1]
    return out


def node_to_cell_adjoint_arr(c: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """q with <q, v>_W = hx hy sum_cells c * (D+x D+y v)."""
    e = c / (hx * hy)
    ey = np.roll(e, 1, axis=1) - e  # adjoint of the forward y difference
    out = np.zeros((c.shape[0] + 1, c.shape[1]))
    out[:-1] -= ey
    out[1:] += ey
    out[0] *= 2.0
    out[-1] *= 2.0
    return out


def bracket_arr(f: np.ndarray, g: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """[f, g] with the mixed product formed on cell centres.

    Forming f_xy g_xy as a node average of cell products makes
    int [w, w] = 0 hold exactly for the discrete closure, the discrete
    counterpart of the null-Lagrangian property of the Monge-Ampere term.
    """
    fxx, fyy, fxy = dxx_arr(f, hx), dyy_arr(f, hy), dxy_cell_arr(f, hx, hy)
    if g is f:
        return fxx * fyy - cell_to_node_arr(fxy**2)
    gxx, gyy, gxy = dxx_arr(g, hx), dyy_arr(g, hy), dxy_cell_arr(g, hx, hy)
    return 0.5 * fxx * gyy + 0.5 * fyy * gxx - cell_to_node_arr(fxy * gxy)


def bracket_adjoint_arr(w: np.ndarray, p: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Adjoint of v -> [w, v] applied to p, i.e. the field q with <p,[w,v]> = <q,v>."""
    wxx, wyy, wxy = dxx_arr(w, hx), dyy_arr(w, hy), dxy_cell_arr(w, hx, hy)
    # <p, N(c)>_W = hx hy sum_cells c * A(p), A = four-corner average
    py = 0.5 * (p + np.roll(p, -1, axis=1))
    ap = 0.5 * (py[1:] + py[:-1])
    return (
        0.5 * dyy_arr(wxx * p, hy)
        + 0.5 * dxx_arr(wyy * p, hx)
        - node_to_cell_adjoint_arr(ap * wxy, hx, hy)
    )


def to_spectral(v: np.ndarray) -> np.ndarray:
    return sfft.rfft(sfft.dct(v, type=1, axis=0), axis=1)


def from_spectral(c: np.ndarray, ny: int) -> np.ndarray:
    return sfft.idct(sfft.irfft(c, n=ny, axis=1), type=1, axis=0)


def apply_symbol(v: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    return from_spectral(to_spectral(v) * symbol, v.shape[1])


def integrate_arr(v: np.ndarray, spec: DomainSpec) -> float:
    return float(np.sum(spec.weights * v))


def inner_arr(u: np.ndarray, v: np.ndarray, spec: DomainSpec) -> float:
    return float(np.sum(spec.weights * u * v))


def project_zero_mean_arr(v: np.ndarray, spec: DomainSpec) -> np.ndarray:
    return v - integrate_arr(v, spec) / spec.area


def shortening_arr(v: np.ndarray, spec: DomainSpec) -> float:
    """S = 1/2 int w_x^2 with staggered forward differences.

    Equals -1/2 <w, dxx w> exactly, which is what makes the discrete energy
    identities hold to roundoff.
    """
    d = np.diff(v, axis=0) / spec.hx
    return 0.5 * float(np.sum(d**2)) * spec.hx * spec.hy


def symmetrize_arr(v: np.ndarray) -> np.ndarray:
    # one reflection at a time: a + b == b + a in floating point, so each pass is exactly even
    u = 0.5 * (v + v[::-1, :])
    return 0.5 * (u + np.roll(u[:, ::-1], 1, axis=1))


# --- public field operators ------------------------------------------------


def dx(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, dx_arr(f.values, f.spec.hx))


def dy(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, dy_arr(f.values, f.spec.hy))


def dxx(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, dxx_arr(f.values, f.spec.hx))


def dyy(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, dyy_arr(f.values, f.spec.hy))


def dxy(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, dxy_arr(f.values, f.spec.hx, f.spec.hy))


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, laplacian_arr(f.values, f.spec.hx, f.spec.hy))


def bracket(f: ScalarField, g: ScalarField) -> ScalarField:
    """[f, g] = 1/2 f_xx g_yy + 1/2 f_yy g_xx - f_xy g_xy."""
    _check(f, g)
    gv = f.values if g is f else g.values
    return ScalarField(f.spec, bracket_arr(f.values, gv, f.spec.hx, f.spec.hy))


def integrate(f: ScalarField) -> float:
    return integrate_arr(f.values, f.spec)


def inner_l2(f: ScalarField, g: ScalarField) -> float:
    _check(f, g)
    return inner_arr(f.values, g.values, f.spec)


def norm_l2(f: ScalarField) -> float:
    return float(np.sqrt(inner_l2(f, f)))


def project_zero_mean(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, project_zero_mean_arr(f.values, f.spec))


def symmetrize(f: ScalarField, cls: SymmetryClass = SymmetryClass.EVEN_XY) -> ScalarField:
    """Average over the reflections x -> -x, y -> -y of the symmetry class."""
    if SymmetryClass(cls) is SymmetryClass.NONE:
        return f
    return ScalarField(f.spec, symmetrize_arr(f.values))
