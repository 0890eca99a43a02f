"""Airy stress function solves.

All solves diagonalise the biharmonic stencil on the cosine x Fourier basis,
so they are exact up to roundoff for the discrete operator in `grid`.
"""
from __future__ import annotations

import numpy as np

from .grid import (
    DomainSpec,
    ScalarField,
    apply_symbol,
    bracket_arr,
    dxx_arr,
    integrate_arr,
    project_zero_mean_arr,
)


class AiryError(ArithmeticError):
    pass


class NonZeroMeanRhs(AiryError):
    pass


class NotFinite(AiryError):
    pass


MEAN_TOL = 1e-6


def solve_biharmonic_arr(rhs: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """Zero-mean phi with laplacian^2 phi = rhs - mean(rhs); no checks."""
    phi = apply_symbol(rhs, spec.inv_mu4)
    return project_zero_mean_arr(phi, spec)


def solve_biharmonic(rhs: ScalarField, check_mean: bool = True) -> ScalarField:
    """Solve laplacian^2 phi = rhs with zero-mean phi.

    The rhs is projected to zero mean first. If the removed mean is larger
    than 1e-6 * ||rhs|| (in the averaged sense) NonZeroMeanRhs is raised,
    since that points at an inconsistent operator upstream.
    """
    spec = rhs.spec
    v = rhs.values
    if not np.all(np.isfinite(v)):
        raise NotFinite("non-finite values in biharmonic right-hand side")
    mean = integrate_arr(v, spec) / spec.area
    scale = np.sqrt(integrate_arr(v * v, spec) / spec.area)
    if check_mean and abs(mean) > MEAN_TOL * max(scale, np.finfo(float).tiny):
        raise NonZeroMeanRhs(f"rhs mean {mean:.3e} exceeds {MEAN_TOL:g} x rms {scale:.3e}")
    return ScalarField(spec, solve_biharmonic_arr(project_zero_mean_arr(v, spec), spec))


def phi1_arr(w: np.ndarray, spec: DomainSpec) -> np.ndarray:
    return solve_biharmonic_arr(-dxx_arr(w, spec.hx), spec)


def phi2_arr(w: np.ndarray, spec: DomainSpec) -> np.ndarray:
    ww = bracket_arr(w, w, spec.hx, spec.hy)
    return solve_biharmonic_arr(-project_zero_mean_arr(ww, spec), spec)


def phi_arr(w: np.ndarray, spec: DomainSpec) -> np.ndarray:
    rhs = dxx_arr(w, spec.hx) + bracket_arr(w, w, spec.hx, spec.hy)
    return solve_biharmonic_arr(-project_zero_mean_arr(rhs, spec), spec)


def _checked(w: ScalarField) -> None:
    if not w.is_finite():
        raise NotFinite("non-finite displacement field")


def phi1_of(w: ScalarField) -> ScalarField:
    """Linear part: laplacian^2 phi1 = -w_xx."""
    _checked(w)
    return ScalarField(w.spec, phi1_arr(w.values, w.spec))


def phi2_of(w: ScalarField) -> ScalarField:
    """Quadratic part: laplacian^2 phi2 = -[w, w] (mean removed)."""
    _checked(w)
    return ScalarField(w.spec, phi2_arr(w.values, w.spec))


def phi_of(w: ScalarField) -> ScalarField:
    """Full Airy function: laplacian^2 phi + [w, w] + w_xx = 0."""
    _checked(w)
    return ScalarField(w.spec, phi_arr(w.values, w.spec))
