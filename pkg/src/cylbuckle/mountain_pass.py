"""Discrete mountain-pass algorithm on F_lambda (and on E restricted to S = const).

A polyline from w1 = 0 to w2 (F_lambda(w2) < 0) is deformed by repeatedly
moving its highest point a small distance downhill. The polyline is
periodically re-spaced to equal X-arclength so that it does not kink.
Once the highest point stops improving (its distance to the saddle is
limited by the path spacing), it is handed to a Newton polish.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from scipy.sparse.linalg import LinearOperator, eigsh

from . import airy
from . import energy as en
from . import newton
from .energy import GradientMetric
from .flows import (
    FlowParams,
    NotReached,
    Stagnation,
    _restore,
    descend,
    projected_energy_gradient,
)
from .grid import ScalarField, apply_symbol, dxx_arr, dyy_arr, inner_arr, shortening_arr, symmetrize_arr

log = logging.getLogger(__name__)


class MountainPassError(RuntimeError):
    def __init__(self, msg, best: ScalarField | None = None):
        super().__init__(msg)
        self.best = best


class EndpointNotNegative(MountainPassError):
    pass


class StepUnderflow(MountainPassError):
    pass


class MaxIterations(MountainPassError):
    pass


class ConstraintDrift(MountainPassError):
    pass


class NotConverged(MountainPassError):
    pass


@dataclass
class MpParams:
    n_path: int = 41
    h0: float = 0.1
    h_min: float = 1e-12
    tol: float = 1e-6
    k_repar: int = 10
    max_iters: int = 20_000
    metric: GradientMetric = GradientMetric.X_PRECONDITIONED
    symmetrize: bool = True
    # Newton polish of the path maximum once the discrete loop stalls.
    polish: bool = True
    polish_tol: float = 1e-10
    stall_window: int = 200
    log_file: TextIO | None = None


@dataclass
class MpPath:
    points: np.ndarray  # (n_path, nx+1, ny)
    f_values: np.ndarray
    lam: float

    def as_fields(self, spec) -> list[ScalarField]:
        return [ScalarField(spec, p) for p in self.points]


@dataclass
class MpResult:
    w_mp: ScalarField
    level_c: float
    grad_norm: float
    iterations: int
    metric: GradientMetric
    path_max: float = float("nan")
    initial_path_max: float = float("nan")
    polished: bool = False
    newton_steps: int = 0
    path: MpPath | None = None
    history: list = field(default_factory=list)


def _x_dist(u: np.ndarray, v: np.ndarray, spec) -> float:
    d = u - v
    return float(np.sqrt(max(inner_arr(d, apply_symbol(d, spec.x_gram), spec), 0.0)))


def reparametrize(points: np.ndarray, spec) -> np.ndarray:
    """Re-space a polyline to equal X-arclength by piecewise-linear interpolation."""
    n = len(points)
    seg = np.array([_x_dist(points[i + 1], points[i], spec) for i in range(n - 1)])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return points.copy()
    targets = np.linspace(0.0, s[-1], n)
    out = np.empty_like(points)
    out[0], out[-1] = points[0], points[-1]
    for k in range(1, n - 1):
        i = min(np.searchsorted(s, targets[k], side="right") - 1, n - 2)
        t = (targets[k] - s[i]) / seg[i] if seg[i] > 0 else 0.0
        out[k] = (1 - t) * points[i] + t * points[i + 1]
    return out


def spacing_spread(points: np.ndarray, spec) -> float:
    """max/min - 1 of consecutive X-distances."""
    seg = [_x_dist(points[i + 1], points[i], spec) for i in range(len(points) - 1)]
    return max(seg) / min(seg) - 1.0


def _run_loop(points, fvals, value_fn, step_fn, spec, params: MpParams, restore=None):
    """Shared main loop. step_fn(w) -> (direction, norm); value_fn(w) -> float."""
    n = len(points)
    h = params.h0
    accepted = streak = 0
    history = []
    best = (np.inf, None)
    last_improve = 0
    it = 0
    reason = "max_iters"
    for it in range(params.max_iters):
        m = int(np.argmax(fvals[1:-1])) + 1
        d, gn = step_fn(points[m])
        history.append((it, m, float(fvals[m]), gn, h))
        if params.log_file is not None:
            params.log_file.write(f"{it},{m},{fvals[m]:.17g},{gn:.17g},{h:.6g}\n")
        if gn < best[0] * 0.999:
            best = (gn, m)
            last_improve = it
        if gn <= params.tol:
            reason = "tol"
            break
        if it - last_improve > params.stall_window:
            reason = "stall"
            break
        trial = points[m] - h * d
        if restore is not None:
            trial = restore(trial)
        ft = value_fn(trial)
        if np.isfinite(ft) and ft < fvals[m] - 1e-14:
            points[m] = trial
            fvals[m] = ft
            accepted += 1
            streak += 1
            if streak >= 5:
                h *= 1.2
                streak = 0
            if accepted % params.k_repar == 0:
                points[:] = reparametrize(points, spec)
                if restore is not None:
                    for k in range(1, n - 1):
                        points[k] = restore(points[k])
                for k in range(1, n - 1):
                    fvals[k] = value_fn(points[k])
        else:
            h *= 0.5
            streak = 0
            if h < params.h_min:
                reason = "underflow"
                break
    m = int(np.argmax(fvals[1:-1])) + 1
    return m, it, reason, history


def run_mountain_pass(lam: float, w2: ScalarField, params: MpParams | None = None) -> MpResult:
    """Mountain-pass point of F_lambda between the origin and w2."""
    params = params or MpParams()
    spec = w2.spec
    f2 = en.f_lambda_arr(w2.values, lam, spec)
    if not f2 < 0:
        raise EndpointNotNegative(f"F_lambda(w2) = {f2:.6g} is not negative")
    v2 = symmetrize_arr(w2.values) if params.symmetrize else w2.values.copy()
    ts = np.linspace(0.0, 1.0, params.n_path)
    points = ts[:, None, None] * v2[None]
    value = lambda v: en.f_lambda_arr(v, lam, spec)  # noqa: E731
    fvals = np.array([value(p) for p in points])
    fvals[0] = 0.0
    init_max = float(fvals.max())

    def step(v):
        g, gn = en.grad_arr(v, lam, spec, params.metric)
        if params.symmetrize:
            g = symmetrize_arr(g)
        return g, gn

    m, it, reason, history = _run_loop(points, fvals, value, step, spec, params)
    path = MpPath(points, fvals, lam)
    w_best = points[m].copy()
    gn = step(w_best)[1]
    result = MpResult(ScalarField(spec, w_best), float(fvals[m]), gn, it, params.metric,
                      path_max=float(fvals[m]), initial_path_max=init_max, path=path,
                      history=history)
    if gn <= params.tol:
        return result
    if not params.polish:
        if reason == "underflow":
            raise StepUnderflow(f"step underflow after {it} iterations (|g|={gn:.3g})",
                                result.w_mp)
        raise MaxIterations(f"no convergence after {it} iterations (|g|={gn:.3g})", result.w_mp)
    try:
        wr, steps = newton.newton_refine(result.w_mp, lam, tol=params.polish_tol,
                                         symmetrize=params.symmetrize, return_steps=True)
    except newton.NewtonError as exc:
        raise NotConverged(f"Newton polish failed: {exc}", result.w_mp) from exc
    result.w_mp = wr
    result.level_c = en.f_lambda(wr, lam)
    result.grad_norm = en.gradient_norm(wr, lam, params.metric)
    result.polished = True
    result.newton_steps = steps
    log.info("mountain pass: %s after %d iterations, path max %.6g, polished level %.6g",
             reason, it, result.path_max, result.level_c)
    return result


def localization_ratio(w: ScalarField, box: float = 0.5) -> float:
    """Largest |w_xx|, |w_yy| outside the centred box of half-widths box*(a, b), over the global max.

    Curvatures rather than w itself: the dimple carries a slowly varying
    far field (including an x-independent profile) that costs almost no energy.
    """
    spec = w.spec
    X, Y = spec.mesh()
    outside = (np.abs(X) > box * spec.a) | (np.abs(Y) > box * spec.b)
    worst = 0.0
    for d in (dxx_arr(w.values, spec.hx), dyy_arr(w.values, spec.hy)):
        d = np.abs(d)
        worst = max(worst, float(d[outside].max() / d.max()))
    return worst


# --- constrained variant ---------------------------------------------------


def run_constrained_mountain_pass(s_target: float, w_a: ScalarField, w_b: ScalarField,
                                  params: MpParams | None = None) -> MpResult:
    """Saddle of E on {S = s_target} between two constrained minimisers.

    No Newton polish is applied here: the loop stops at tol, on stall or on
    step underflow and reports the highest point.
    """
    params = params or MpParams()
    spec = w_a.spec
    for w in (w_a, w_b):
        s = shortening_arr(w.values, spec)
        if abs(s - s_target) > 1e-8 * s_target:
            raise ConstraintDrift(f"endpoint has S = {s:.10g}, expected {s_target:.10g}")
    restore = lambda v: _restore(v, s_target, spec)  # noqa: E731
    value = lambda v: en.energy_arr(v, spec)  # noqa: E731
    if np.array_equal(w_a.values, w_b.values):
        e = value(w_a.values)
        _, gn, _ = projected_energy_gradient(w_a.values, spec, params.metric)
        return MpResult(w_a, e, gn, 0, params.metric, path_max=e, initial_path_max=e)
    ts = np.linspace(0.0, 1.0, params.n_path)
    points = np.array([restore((1 - t) * w_a.values + t * w_b.values) for t in ts])
    points[0], points[-1] = w_a.values, w_b.values
    fvals = np.array([value(p) for p in points])
    init_max = float(fvals.max())

    def step(v):
        pg, gn, _ = projected_energy_gradient(v, spec, params.metric, params.symmetrize)
        return pg, gn

    m, it, reason, history = _run_loop(points, fvals, value, step, spec, params, restore=restore)
    for p in points[1:-1]:
        if abs(shortening_arr(p, spec) - s_target) > 1e-10 * s_target:
            raise ConstraintDrift("path left the constraint manifold")
    w = points[m].copy()
    gn = step(w)[1]
    return MpResult(ScalarField(spec, w), float(fvals[m]), gn, it, params.metric,
                    path_max=float(fvals[m]), initial_path_max=init_max,
                    path=MpPath(points, fvals, float("nan")), history=history)


# --- saddle verification ---------------------------------------------------


@dataclass
class VerifyReport:
    eigenvalue: float
    delta: float
    minus_outcome: str
    minus_final_f: float
    minus_final_xnorm: float
    plus_outcome: str
    plus_final_f: float
    plus_final_xnorm: float
    xnorm_mp: float

    @property
    def ok(self) -> bool:
        return {self.minus_outcome, self.plus_outcome} == {"shrinks", "grows"}


def lowest_direction(w: ScalarField, lam: float, symmetrize: bool = True,
                     iters: int = 60) -> tuple[ScalarField, float]:
    """Most negative eigenpair of the second variation in the X metric."""
    spec = w.spec
    phi = airy.phi_arr(w.values, spec)
    sq = np.sqrt(spec.weights)
    root_inv = np.sqrt(spec.inv_x_gram)
    shape = spec.shape

    def op(u):
        v = u.reshape(shape) / sq
        v = apply_symbol(v, root_inv)
        if symmetrize:
            v = symmetrize_arr(v)
        hv = en.hessian_action_arr(w.values, v, lam, spec, phi)
        hv = apply_symbol(hv, root_inv)
        if symmetrize:
            hv = symmetrize_arr(hv)
        return (hv * sq).ravel()

    n = int(np.prod(shape))
    A = LinearOperator((n, n), matvec=op, dtype=float)
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(shape)
    if symmetrize:
        v0 = symmetrize_arr(v0)
    vals, vecs = eigsh(A, k=1, which="SA", v0=(v0 * sq).ravel(), maxiter=iters * 10, tol=1e-6)
    d = apply_symbol(vecs[:, 0].reshape(shape) / sq, root_inv)
    if symmetrize:
        d = symmetrize_arr(d)
    d = d / np.sqrt(en.x_inner_arr(d, d, spec))
    return ScalarField(spec, d), float(vals[0])


def verify_mountain_pass(result: MpResult, lam: float, flow: FlowParams | None = None,
                         rel_delta: float = 1e-2, direction: ScalarField | None = None
                         ) -> VerifyReport:
    """Perturb w_MP along its unstable direction both ways and follow the free flow.

    One side should shrink back to the unbuckled state (||w||_X < 1/2
    ||w_MP||_X), the other should reach F_lambda < 0.
    """
    flow = flow or FlowParams(max_steps=20_000)
    w = result.w_mp
    spec = w.spec
    xn = en.x_norm(w)
    if direction is None:
        direction, ev = lowest_direction(w, lam, symmetrize=flow.symmetrize)
    else:
        ev = float("nan")
    # orient the direction so that "+" points away from the origin
    if en.x_inner(direction, w) < 0:
        direction = -direction
    delta = rel_delta * xn

    def stop(v, f):
        return f < 0.0 or en.x_norm_sq_arr(v, spec) < (0.5 * xn) ** 2

    outcomes = []
    for sign in (-1.0, 1.0):
        start = w + sign * delta * direction
        try:
            end, _ = descend(lam, start, flow, stop)
        except (NotReached, Stagnation) as exc:
            end = exc.last
        f = en.f_lambda(end, lam)
        x = en.x_norm(end)
        if f < 0:
            outcome = "grows"
        elif x < 0.5 * xn:
            outcome = "shrinks"
        else:
            outcome = "stuck"
        outcomes.append((outcome, f, x))
    rep = VerifyReport(ev, delta, *outcomes[0], *outcomes[1], xn)
    if rep.minus_outcome == "stuck" and rep.plus_outcome == "stuck":
        raise NotConverged("neither perturbation escaped the saddle")
    return rep
