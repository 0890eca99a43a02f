"""Gradient flows: free descent on F_lambda and descent of E at fixed shortening."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from . import energy as en
from .airy import NotFinite
from .energy import GradientMetric
from .grid import (
    DomainSpec,
    ScalarField,
    dxx_arr,
    inner_arr,
    project_zero_mean_arr,
    shortening_arr,
    symmetrize_arr,
)

log = logging.getLogger(__name__)


class FlowError(RuntimeError):
    pass


class NotReached(FlowError):
    def __init__(self, msg, last: ScalarField | None = None):
        super().__init__(msg)
        self.last = last


class Stagnation(FlowError):
    def __init__(self, msg, last: ScalarField | None = None):
        super().__init__(msg)
        self.last = last


@dataclass
class FlowParams:
    h0: float = 1e-2
    h_min: float = 1e-14
    grow: float = 1.2
    max_steps: int = 100_000
    metric: GradientMetric = GradientMetric.X_PRECONDITIONED
    symmetrize: bool = True
    tol: float = 1e-6
    log_file: TextIO | None = None
    log_every: int = 1


def seed_field(spec: DomainSpec, shape: str = "one_peak", amplitude: float = 5.0,
               width: float = 5.0, symmetrize: bool = True) -> ScalarField:
    """Gaussian bump initial data for the w2 search.

    one_peak: a bump in the centre. two_peaks_y / two_peaks_x: two bumps
    placed on the x = 0 (resp. y = 0) axis, symmetric about the centre.
    """
    X, Y = spec.mesh()

    def bump(x0, y0):
        return np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / width**2)

    if shape == "one_peak":
        v = bump(0.0, 0.0)
    elif shape == "two_peaks_y":
        d = 2.0 * width
        v = bump(0.0, d) + bump(0.0, -d)
    elif shape == "two_peaks_x":
        d = 2.0 * width
        v = bump(d, 0.0) + bump(-d, 0.0)
    else:
        raise ValueError(f"unknown seed shape {shape!r}")
    v = amplitude * v
    v = project_zero_mean_arr(v, spec)
    if symmetrize:
        v = symmetrize_arr(v)
    return ScalarField(spec, v)


def _log(params: FlowParams, it: int, f: float, gn: float, s: float) -> None:
    if params.log_file is not None and it % params.log_every == 0:
        params.log_file.write(f"{it},{f:.17g},{gn:.17g},{s:.17g}\n")


def descend(lam: float, w0: ScalarField, params: FlowParams,
            stop: Callable[[np.ndarray, float], bool]) -> tuple[ScalarField, int]:
    """Backtracking steepest descent on F_lambda until ``stop(w, F)`` is true.

    Accepted steps never increase F. Raises NotReached after max_steps and
    Stagnation if the step underflows before the stop condition holds.
    """
    spec = w0.spec
    w = w0.values.copy()
    if params.symmetrize:
        w = symmetrize_arr(w)
    f = en.f_lambda_arr(w, lam, spec)
    h = params.h0
    for it in range(params.max_steps):
        if stop(w, f):
            return ScalarField(spec, w), it
        g, gn = en.grad_arr(w, lam, spec, params.metric)
        if params.symmetrize:
            g = symmetrize_arr(g)
        _log(params, it, f, gn, shortening_arr(w, spec))
        while True:
            trial = w - h * g
            ft = en.f_lambda_arr(trial, lam, spec)
            if np.isfinite(ft) and ft < f:
                w, f = trial, ft
                h *= params.grow
                break
            h *= 0.5
            if h < params.h_min:
                raise Stagnation(f"step underflow at iteration {it} (F={f:.6g}, |g|={gn:.3g})",
                                 ScalarField(spec, w))
        if not np.isfinite(f):
            raise NotFinite("flow produced non-finite energy")
    raise NotReached(f"stop condition not met within {params.max_steps} steps (F={f:.6g})",
                     ScalarField(spec, w))


def find_w2(lam: float, w0: ScalarField | None = None, spec: DomainSpec | None = None,
            params: FlowParams | None = None) -> ScalarField:
    """Follow dw/dt = -grad F_lambda(w) from w0 until F_lambda(w) < 0.

    Raises NotReached if the flow does not reach negative total potential,
    e.g. because w0 lies in the basin of the unbuckled state or the domain is
    too small to support negative-energy states.
    """
    params = params or FlowParams()
    if w0 is None:
        if spec is None:
            raise ValueError("need w0 or spec")
        w0 = seed_field(spec, symmetrize=params.symmetrize)
    spec = w0.spec
    scale = max(en.x_norm(w0), 1.0)

    def stop(w, f):
        return f < 0.0

    def stuck(w, f):
        return f < 0.0 or en.x_norm_sq_arr(w, spec) < (1e-8 * scale) ** 2

    try:
        w2, it = descend(lam, w0, params, stuck)
    except Stagnation as exc:
        raise NotReached(f"find_w2: {exc}", exc.last) from exc
    if not stop(w2.values, en.f_lambda_arr(w2.values, lam, spec)):
        raise NotReached("find_w2: flow decayed to the unbuckled state", w2)
    log.info("find_w2: F < 0 after %d steps", it)
    return w2


# --- constrained descent -----------------------------------------------------


@dataclass
class ConstrainedResult:
    w: ScalarField
    iterations: int
    grad_norm: float
    energy: float
    history: list = field(default_factory=list)


def _restore(w: np.ndarray, s_target: float, spec: DomainSpec) -> np.ndarray:
    return w * np.sqrt(s_target / shortening_arr(w, spec))


def projected_energy_gradient(w: np.ndarray, spec: DomainSpec, metric: GradientMetric,
                              symmetrize: bool = False) -> tuple[np.ndarray, float, float]:
    """Gradient of E tangent to {S = const} in the given metric.

    Returns (projected gradient, its metric norm, Lagrange multiplier). At a
    constrained critical point the multiplier is the load lambda.
    """
    r = en.grad_l2_arr(w, 0.0, spec)
    rs = -dxx_arr(w, spec.hx)  # L2 representative of S'(w)
    if GradientMetric(metric) is GradientMetric.L2:
        g, gs = r, rs
        ip = lambda u, v, ru, rv: inner_arr(u, v, spec)  # noqa: E731
    else:
        g, gs = en.to_x_metric(r, spec), en.to_x_metric(rs, spec)
        ip = lambda u, v, ru, rv: inner_arr(u, rv, spec)  # noqa: E731
    mult = ip(g, gs, r, rs) / ip(gs, gs, rs, rs)
    pg = g - mult * gs
    prs = r - mult * rs
    if symmetrize:
        pg = symmetrize_arr(pg)
    norm = float(np.sqrt(max(ip(pg, pg, prs, prs), 0.0)))
    return pg, norm, mult


def constrained_descent(w0: ScalarField, s_target: float, params: FlowParams | None = None,
                        ) -> ConstrainedResult:
    """Minimise E over {S = s_target} by projected steepest descent.

    w0 is rescaled once on entry (S is 2-homogeneous), and every trial point
    is rescaled back onto the constraint, so S is held to roundoff.
    """
    params = params or FlowParams()
    spec = w0.spec
    s0 = shortening_arr(w0.values, spec)
    if not s0 > 0:
        raise ValueError("S(w0) must be positive")
    w = _restore(w0.values, s_target, spec)
    if params.symmetrize:
        w = symmetrize_arr(w)
        w = _restore(w, s_target, spec)
    e = en.energy_arr(w, spec)
    h = params.h0
    history = []
    for it in range(params.max_steps):
        pg, gn, mult = projected_energy_gradient(w, spec, params.metric, params.symmetrize)
        history.append((it, e, gn, mult))
        _log(params, it, e, gn, s_target)
        if gn <= params.tol:
            return ConstrainedResult(ScalarField(spec, w), it, gn, e, history)
        while True:
            trial = _restore(w - h * pg, s_target, spec)
            et = en.energy_arr(trial, spec)
            if np.isfinite(et) and et < e:
                w, e = trial, et
                h *= params.grow
                break
            h *= 0.5
            if h < params.h_min:
                # E cannot be lowered further at this resolution; the best point rides on the error
                raise Stagnation(f"constrained descent: step underflow (|g|={gn:.3g})",
                                 ScalarField(spec, w))
    raise NotReached(f"constrained descent: not converged in {params.max_steps} steps",
                     ScalarField(spec, w))
