"""Smoothed Yoshimura test functions and the negative-energy scaling argument.

w_delta(x, y) = f(y + x) + f(y - x) - f(2x)/2 - y^2/2, where f'' is the
indicator of the delta-neighbourhood of the integers scaled by 1/(4 delta).
The quadratic parts cancel, so w_delta = p(y + x) + p(y - x) - p(2x)/2 with
the 1-periodic remainder p(s) = f(s) - s^2/4.

Cell integrals here use a fully periodic grid on [-1/2, 1/2)^2 rather than the
reflected closure of `grid`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DomainSpec, ScalarField, project_zero_mean_arr


class UnderResolved(ValueError):
    pass


class IncompatibleTiling(ValueError):
    pass


@dataclass(frozen=True)
class YoshimuraParams:
    delta: float
    periods_x: int = 1
    periods_y: int = 1

    def __post_init__(self):
        if not 0 < self.delta < 0.25:
            raise ValueError("delta must lie in (0, 1/4)")


def f_profile(delta: float, s):
    """f, f', f'' of the fold profile (closed form)."""
    if not 0 < delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4)")
    s = np.asarray(s, dtype=float)
    n = np.round(s)
    r = s - n  # in [-1/2, 1/2]
    a = np.abs(r)
    inside = a < delta
    # periodic remainder p = f - s^2/4 and its derivatives, first on |r|
    p_abs = np.where(inside, a**2 / (8 * delta), a / 4 - delta / 8) - a**2 / 4
    dp_abs = np.where(inside, a / (4 * delta), 0.25) - a / 2
    ddp = np.where(inside, 1 / (4 * delta), 0.0) - 0.5
    f = s**2 / 4 + p_abs
    fp = s / 2 + np.sign(r) * dp_abs
    fpp = ddp + 0.5
    return f, fp, fpp


def _p(delta, s):
    f, _, _ = f_profile(delta, s)
    return f - np.asarray(s, dtype=float) ** 2 / 4


def w_delta_values(delta: float, X, Y):
    """Closed-form w_delta at points (X, Y)."""
    return _p(delta, Y + X) + _p(delta, Y - X) - 0.5 * _p(delta, 2 * X)


def build_w_delta(params: YoshimuraParams, spec: DomainSpec) -> ScalarField:
    """Sample w_delta on a DomainSpec that tiles whole unit cells.

    The grid must span periods_x x periods_y unit cells (a = periods_x/2,
    b = periods_y/2) with an integer number of nodes per cell.
    """
    if not (math.isclose(2 * spec.a, params.periods_x) and math.isclose(2 * spec.b, params.periods_y)):
        raise IncompatibleTiling(f"domain {spec.label()} does not span "
                                 f"{params.periods_x}x{params.periods_y} unit cells")
    if spec.nx % params.periods_x or spec.ny % params.periods_y:
        raise IncompatibleTiling("node counts must be a multiple of the tiling counts")
    X, Y = spec.mesh()
    v = w_delta_values(params.delta, X, Y)
    return ScalarField(spec, project_zero_mean_arr(v, spec))


# --- periodic cell calculus --------------------------------------------------


def _cell_grid(n: int):
    s = -0.5 + np.arange(n) / n
    return np.meshgrid(s, s, indexing="ij")


def _dxx(v, h, ax):
    return (np.roll(v, -1, ax) - 2 * v + np.roll(v, 1, ax)) / h**2


def _wxy2_nodes(w, h):
    """(w_xy)^2 from cell-centred mixed differences averaged to nodes.

    With this form the cell integral of w_xx w_yy - w_xy^2 vanishes to
    roundoff, as it does for the continuum periodic cell.
    """
    d = np.diff(w, axis=0, append=w[:1])
    c = ((np.roll(d, -1, 1) - d) / h**2) ** 2
    return 0.25 * (c + np.roll(c, 1, 0) + np.roll(c, 1, 1) + np.roll(np.roll(c, 1, 0), 1, 1))


def _biharmonic_periodic(rhs, h):
    n = rhs.shape[0]
    k2 = (4 / h**2) * np.sin(np.pi * np.arange(n) / n) ** 2
    sym = (k2[:, None] + k2[None, : n // 2 + 1]) ** 2
    sym[0, 0] = np.inf
    c = np.fft.rfft2(rhs - rhs.mean())
    return np.fft.irfft2(c / sym, s=rhs.shape)


@dataclass
class CellIntegrals:
    delta: float
    n: int
    int_wx2: float
    int_dw2: float
    int_dphi2: float
    rhs_mean: float  # cell mean of [w,w] + w_xx before projection


def min_nodes(delta: float) -> int:
    """Smallest even node count per unit cell with >= 16/delta nodes."""
    n = int(math.ceil(16.0 / delta))
    return n + (n % 2)


def cell_integrals(delta: float, n: int | None = None) -> CellIntegrals:
    """int w_x^2, int (lap w)^2 and int (lap phi)^2 over one periodic cell."""
    n = n or min_nodes(delta)
    if n * delta < 16 - 1e-9:
        raise UnderResolved(f"{n} nodes per cell under-resolves delta={delta:g} (need >= {16 / delta:.0f})")
    h = 1.0 / n
    X, Y = _cell_grid(n)
    w = w_delta_values(delta, X, Y)
    wxx, wyy = _dxx(w, h, 0), _dxx(w, h, 1)
    rhs = wxx * wyy - _wxy2_nodes(w, h) + wxx
    phi = _biharmonic_periodic(-rhs, h)
    lphi = _dxx(phi, h, 0) + _dxx(phi, h, 1)
    wx = (np.roll(w, -1, 0) - w) / h
    area = h * h
    return CellIntegrals(
        delta=delta,
        n=n,
        int_wx2=float(np.sum(wx**2) * area),
        int_dw2=float(np.sum((wxx + wyy) ** 2) * area),
        int_dphi2=float(np.sum(lphi**2) * area),
        rhs_mean=float(rhs.mean()),
    )


@dataclass
class ScalingRow:
    delta: float
    int_wx2: float
    int_dw2: float
    int_dphi2: float
    slope_dw2: float  # d log int(lap w)^2 / d log(1/delta) against the previous row
    slope_dphi2: float  # d log int(lap phi)^2 / d log(delta) against the previous row


def scaling_report(deltas, n_per_cell: dict | None = None) -> list[ScalingRow]:
    """Cell integrals for decreasing delta and empirical log-slopes between neighbours."""
    deltas = list(deltas)
    if any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    n_per_cell = n_per_cell or {}
    rows: list[ScalingRow] = []
    prev = None
    for d in deltas:
        ci = cell_integrals(d, n_per_cell.get(d))
        if prev is None:
            s1 = s2 = float("nan")
        else:
            lr = math.log(prev.delta / d)
            s1 = math.log(ci.int_dw2 / prev.int_dw2) / lr
            s2 = -math.log(ci.int_dphi2 / prev.int_dphi2) / lr
        rows.append(ScalingRow(d, ci.int_wx2, ci.int_dw2, ci.int_dphi2, s1, s2))
        prev = ci
    return rows


@dataclass
class QRow:
    eps: float
    delta: float
    q: float
    q_quadratic: float


def q_from_cell(eps: float, ci: CellIntegrals) -> float:
    """Q_eps for w~(x,y) = w_delta(x sqrt(eps), y sqrt(eps)) / eps, from unit-cell integrals.

    Under that change of variables the integrals over the stretched cell are
    eps^-1 int(lap w)^2, eps^-3 int(lap phi)^2 and eps^-2 int w_x^2.
    """
    return (eps * ci.int_dw2 + ci.int_dphi2 / eps) / ci.int_wx2


def q_epsilon(eps_list, n_max: int = 2048) -> list[QRow]:
    """Q_eps with delta = eps^(2/3) for each eps (sorted decreasing)."""
    rows = []
    for eps in sorted(eps_list, reverse=True):
        delta = eps ** (2.0 / 3.0)
        if not delta < 0.25:
            raise ValueError(f"eps={eps:g} gives delta={delta:.3g} >= 1/4")
        n = min_nodes(delta)
        if n > n_max:
            raise UnderResolved(f"eps={eps:g} needs {n} nodes per cell (limit {n_max})")
        ci = cell_integrals(delta, n)
        q = q_from_cell(eps, ci)
        # linearised quotient: phi replaced by its part linear in w
        rows.append(QRow(eps, delta, q, _q_quadratic(eps, delta, n)))
    return rows


def _q_quadratic(eps: float, delta: float, n: int, amplitude: float = 1.0) -> float:
    h = 1.0 / n
    X, Y = _cell_grid(n)
    w = amplitude * w_delta_values(delta, X, Y)
    wxx, wyy = _dxx(w, h, 0), _dxx(w, h, 1)
    phi1 = _biharmonic_periodic(-wxx, h)
    lphi = _dxx(phi1, h, 0) + _dxx(phi1, h, 1)
    wx = (np.roll(w, -1, 0) - w) / h
    return float((eps * np.sum((wxx + wyy) ** 2) + np.sum(lphi**2) / eps) / np.sum(wx**2))
