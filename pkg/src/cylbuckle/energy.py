"""Energies, shortening, total potential and its first and second variations.

The gradient returned here is the exact derivative of the *discrete*
functional F = E - lambda S with respect to the quadrature inner product.
It is the stencil-consistent form of the residual

    laplacian^2 w + lambda w_xx - phi_xx - 2 [w, phi],

with the bracket term written through the adjoint of v -> [w, v]; the two
agree as h -> 0 but only the adjoint form passes finite-difference checks at
fixed h.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, asdict

import numpy as np

from . import airy
from .grid import (
    DomainSpec,
    ScalarField,
    apply_symbol,
    bracket_adjoint_arr,
    bracket_arr,
    dxx_arr,
    inner_arr,
    laplacian_arr,
    project_zero_mean_arr,
    shortening_arr,
)


class GradientMetric(enum.Enum):
    L2 = "l2"
    X_PRECONDITIONED = "x_preconditioned"


@dataclass(frozen=True)
class EnergyBreakdown:
    e2: float
    e3: float
    e4: float
    e_total: float
    shortening_s: float
    f_lambda: float
    x_norm_sq: float
    lam: float

    def as_dict(self) -> dict:
        return asdict(self)


def _sq(v: np.ndarray, spec: DomainSpec) -> float:
    return inner_arr(v, v, spec)


def _lap(v: np.ndarray, spec: DomainSpec) -> np.ndarray:
    return laplacian_arr(v, spec.hx, spec.hy)


def f_lambda_arr(w: np.ndarray, lam: float, spec: DomainSpec) -> float:
    phi = airy.phi_arr(w, spec)
    e = 0.5 * _sq(_lap(w, spec), spec) + 0.5 * _sq(_lap(phi, spec), spec)
    return e - lam * shortening_arr(w, spec)


def energy_arr(w: np.ndarray, spec: DomainSpec) -> float:
    return f_lambda_arr(w, 0.0, spec)


def grad_l2_arr(w: np.ndarray, lam: float, spec: DomainSpec, phi: np.ndarray | None = None) -> np.ndarray:
    hx, hy = spec.hx, spec.hy
    if phi is None:
        phi = airy.phi_arr(w, spec)
    r = (
        _lap(_lap(w, spec), spec)
        + lam * dxx_arr(w, hx)
        - dxx_arr(phi, hx)
        - 2.0 * bracket_adjoint_arr(w, phi, hx, hy)
    )
    return project_zero_mean_arr(r, spec)


def to_x_metric(r: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """Riesz representative in the X inner product of the functional <r, .>."""
    return apply_symbol(r, spec.inv_x_gram)


def x_inner_arr(u: np.ndarray, v: np.ndarray, spec: DomainSpec) -> float:
    return inner_arr(u, apply_symbol(v, spec.x_gram), spec)


def x_norm_sq_arr(w: np.ndarray, spec: DomainSpec) -> float:
    lw = _lap(w, spec)
    lp = _lap(airy.phi1_arr(w, spec), spec)
    return _sq(lw, spec) + _sq(lp, spec)


def grad_arr(w: np.ndarray, lam: float, spec: DomainSpec, metric: GradientMetric) -> tuple[np.ndarray, float]:
    """Gradient in the requested metric and its norm in that metric."""
    r = grad_l2_arr(w, lam, spec)
    if GradientMetric(metric) is GradientMetric.L2:
        return r, float(np.sqrt(_sq(r, spec)))
    g = to_x_metric(r, spec)
    return g, float(np.sqrt(max(inner_arr(g, r, spec), 0.0)))


def hessian_action_arr(w: np.ndarray, v: np.ndarray, lam: float, spec: DomainSpec,
                       phi: np.ndarray | None = None) -> np.ndarray:
    """Second variation of the discrete F at w applied to v (quadrature Riesz form)."""
    hx, hy = spec.hx, spec.hy
    if phi is None:
        phi = airy.phi_arr(w, spec)
    rhs = dxx_arr(v, hx) + 2.0 * bracket_arr(w, v, hx, hy)
    psi = airy.solve_biharmonic_arr(-project_zero_mean_arr(rhs, spec), spec)
    out = (
        _lap(_lap(v, spec), spec)
        + lam * dxx_arr(v, hx)
        - dxx_arr(psi, hx)
        - 2.0 * bracket_adjoint_arr(w, psi, hx, hy)
        - 2.0 * bracket_adjoint_arr(v, phi, hx, hy)
    )
    return project_zero_mean_arr(out, spec)


def metric_condition(spec: DomainSpec) -> tuple[float, float]:
    """Bounds c_lo, c_hi with c_lo ||r||_L2 <= ||g_X||_X <= c_hi ||r||_L2."""
    g = spec.x_gram.copy()
    g[0, 0] = np.nan
    return float(1.0 / np.sqrt(np.nanmax(g))), float(1.0 / np.sqrt(np.nanmin(g)))


# --- ScalarField surface -----------------------------------------------------


def breakdown(w: ScalarField, lam: float) -> EnergyBreakdown:
    """E2 + E3 + E4, S, F_lambda and ||w||_X^2 at load lam."""
    spec = w.spec
    if not w.is_finite():
        raise airy.NotFinite("non-finite displacement field")
    v = w.values
    lw = _lap(v, spec)
    l1 = _lap(airy.phi1_arr(v, spec), spec)
    l2 = _lap(airy.phi2_arr(v, spec), spec)
    xn = _sq(lw, spec) + _sq(l1, spec)
    e2 = 0.5 * xn
    e3 = inner_arr(l1, l2, spec)
    e4 = 0.5 * _sq(l2, spec)
    e = e2 + e3 + e4
    s = shortening_arr(v, spec)
    return EnergyBreakdown(e2, e3, e4, e, s, e - lam * s, xn, float(lam))


def energy(w: ScalarField) -> float:
    return energy_arr(w.values, w.spec)


def shortening(w: ScalarField) -> float:
    return shortening_arr(w.values, w.spec)


def f_lambda(w: ScalarField, lam: float) -> float:
    return f_lambda_arr(w.values, lam, w.spec)


def gradient(w: ScalarField, lam: float, metric: GradientMetric = GradientMetric.X_PRECONDITIONED) -> ScalarField:
    g, _ = grad_arr(w.values, lam, w.spec, metric)
    return ScalarField(w.spec, g)


def gradient_norm(w: ScalarField, lam: float, metric: GradientMetric = GradientMetric.X_PRECONDITIONED) -> float:
    return grad_arr(w.values, lam, w.spec, metric)[1]


def hessian_action(w: ScalarField, v: ScalarField, lam: float) -> ScalarField:
    return ScalarField(w.spec, hessian_action_arr(w.values, v.values, lam, w.spec))


def x_norm(w: ScalarField) -> float:
    return float(np.sqrt(x_norm_sq_arr(w.values, w.spec)))


def x_inner(u: ScalarField, v: ScalarField) -> float:
    return x_inner_arr(u.values, v.values, u.spec)


def sharp_inequality_gap(w: ScalarField) -> float:
    """1/2 ||w||_X^2 - 2 S(w); non-negative up to roundoff."""
    return 0.5 * x_norm_sq_arr(w.values, w.spec) - 2.0 * shortening_arr(w.values, w.spec)


def mode_load_table(spec: DomainSpec) -> np.ndarray:
    """Load at which each cosine x Fourier mode has zero quadratic energy.

    E2 and S are diagonal on that basis with symbols (mu^4 + kx^4/mu^4)/2 and
    kx^2/2, so the ratio is the neutral load of the mode. Modes with kx = 0
    carry no shortening and get +inf.
    """
    kx2 = spec.kx2[:, None] * np.ones_like(spec.mu2)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = spec.x_gram / kx2
    lam[kx2 == 0] = np.inf
    return lam


def linear_critical_load(spec: DomainSpec) -> tuple[float, tuple[int, int]]:
    """Smallest neutral load over all grid modes and the (k, l) index that attains it."""
    table = mode_load_table(spec)
    k, l = np.unravel_index(int(np.argmin(table)), table.shape)
    return float(table[k, l]), (int(k), int(l))


def mode_field(spec: DomainSpec, k: int, l: int) -> ScalarField:
    """cos(k pi (x + a) / 2a) cos(l pi (y + b) / b) on the grid."""
    X, Y = spec.mesh()
    v = np.cos(k * np.pi * (X + spec.a) / (2 * spec.a)) * np.cos(l * np.pi * (Y + spec.b) / spec.b)
    return ScalarField(spec, v)
