"""Pseudo-arclength continuation of critical points of F_lambda in lambda.

Unknowns are u = (w, lambda). The arclength metric uses the X inner product
for w, so ds is measured in the same units as ||w||_X. Corrections solve the
bordered system

    [ J(w)      r_lambda ] [dw     ]     [ r(w, lambda) ]
    [ <t_w,.>_X  t_lam   ] [dlambda] = - [ N(w, lambda) ]

with GMRES, which stays well posed through simple folds where J alone is
singular.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.sparse.linalg import LinearOperator

from . import airy
from . import energy as en
from .grid import DomainSpec, ScalarField, apply_symbol, dxx_arr, project_zero_mean_arr, symmetrize_arr
from .newton import Diverged, LinearSolveStalled, NewtonError, krylov_solve, newton_refine, residual_norm

__all__ = [
    "Branch",
    "BranchRecord",
    "StepFailure",
    "StepParams",
    "VFit",
    "continue_branch",
    "domain_study",
    "fit_v_curve",
    "near_two_exponent",
    "newton_refine",
    "Diverged",
    "LinearSolveStalled",
]

log = logging.getLogger(__name__)


class StepFailure(NewtonError):
    pass


@dataclass
class StepParams:
    ds: float = 0.5
    ds_min: float = 1e-4
    ds_max: float = 2.0
    grow: float = 1.5
    newton_tol: float = 1e-9
    max_newton: int = 8
    max_steps: int = 200
    # steps taken beyond a fold before the trace stops
    steps_after_fold: int = 8
    symmetrize: bool = True


@dataclass
class BranchRecord:
    lam: float
    w: ScalarField
    level: float
    x_norm_sq: float
    is_fold_passed: bool = False
    residual: float = 0.0


@dataclass
class Branch:
    records: list[BranchRecord]
    domain: DomainSpec
    folds: list[int] = field(default_factory=list)  # record indices just past a fold

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    @property
    def levels(self) -> np.ndarray:
        return np.array([r.level for r in self.records])

    @property
    def x_norms_sq(self) -> np.ndarray:
        return np.array([r.x_norm_sq for r in self.records])

    def mountain_pass_segment(self) -> list[BranchRecord]:
        return [r for r in self.records if not r.is_fold_passed]


# --- bordered Newton corrector ---------------------------------------------


def _sym(v, on):
    return symmetrize_arr(v) if on else v


def _r_lambda(w: np.ndarray, spec: DomainSpec) -> np.ndarray:
    return project_zero_mean_arr(dxx_arr(w, spec.hx), spec)


def _x_dot(u: np.ndarray, v: np.ndarray, spec: DomainSpec) -> float:
    return en.x_inner_arr(u, v, spec)


def _bordered_operator(w, lam, tw, tl, spec, symmetrize):
    phi = airy.phi_arr(w, spec)
    rl = _sym(_r_lambda(w, spec), symmetrize)
    row = spec.weights * apply_symbol(tw, spec.x_gram)  # <tw, .>_X as a plain dot product
    shape = spec.shape
    n = int(np.prod(shape))

    def mv(u):
        dw = _sym(u[:n].reshape(shape), symmetrize)
        top = _sym(en.hessian_action_arr(w, dw, lam, spec, phi), symmetrize) + rl * u[n]
        return np.concatenate([top.ravel(), [float(np.sum(row * dw)) + tl * u[n]]])

    def prec(u):
        top = apply_symbol(u[:n].reshape(shape), spec.inv_x_gram)
        return np.concatenate([top.ravel(), [u[n]]])

    return (LinearOperator((n + 1, n + 1), matvec=mv, dtype=float),
            LinearOperator((n + 1, n + 1), matvec=prec, dtype=float))


def _tangent(w, lam, spec, direction, symmetrize):
    """Unit tangent at a regular point, oriented so that dlambda/ds has sign `direction`."""
    phi = airy.phi_arr(w, spec)
    shape = spec.shape
    n = int(np.prod(shape))

    def mv(u):
        v = _sym(u.reshape(shape), symmetrize)
        return _sym(en.hessian_action_arr(w, v, lam, spec, phi), symmetrize).ravel()

    A = LinearOperator((n, n), matvec=mv, dtype=float)
    M = LinearOperator((n, n), matvec=lambda u: apply_symbol(u.reshape(shape), spec.inv_x_gram).ravel(),
                       dtype=float)
    rl = _sym(_r_lambda(w, spec), symmetrize)
    tw = -krylov_solve(A, rl.ravel(), M, rtol=1e-8).reshape(shape)
    tw = _sym(tw, symmetrize)
    norm = math.sqrt(_x_dot(tw, tw, spec) + 1.0)
    s = 1.0 if direction >= 0 else -1.0
    return s * tw / norm, s / norm


def _correct(w_pred, lam_pred, tw, tl, spec, params: StepParams):
    """Newton on (r = 0, arclength plane). Returns (w, lam, |r|, iterations)."""
    w, lam = w_pred.copy(), lam_pred
    for k in range(params.max_newton + 1):
        r = _sym(en.grad_l2_arr(w, lam, spec), params.symmetrize)
        rn = residual_norm(r, spec)
        nres = _x_dot(tw, w - w_pred, spec) + tl * (lam - lam_pred)
        if not np.isfinite(rn):
            raise Diverged("non-finite residual in corrector")
        if rn <= params.newton_tol and abs(nres) <= 1e-8 * max(1.0, abs(lam)):
            return w, lam, rn, k
        if k == params.max_newton:
            break
        A, M = _bordered_operator(w, lam, tw, tl, spec, params.symmetrize)
        rhs = -np.concatenate([r.ravel(), [nres]])
        du = krylov_solve(A, rhs, M, rtol=min(1e-4, max(rn, 1e-12)))
        w = w + _sym(du[:-1].reshape(spec.shape), params.symmetrize)
        lam = lam + float(du[-1])
    raise Diverged(f"corrector did not converge (|r|={rn:.3e})")


def _record(w, lam, spec, fold_passed, residual):
    f = ScalarField(spec, w)
    return BranchRecord(float(lam), f, en.f_lambda_arr(w, lam, spec), en.x_norm_sq_arr(w, spec),
                        fold_passed, float(residual))


def _trace(w0, lam0, lam_range, direction, params: StepParams, spec):
    lo, hi = lam_range
    tw, tl = _tangent(w0, lam0, spec, direction, params.symmetrize)
    w, lam = w0, lam0
    ds = params.ds
    out: list[BranchRecord] = []
    folds: list[int] = []
    fold_passed = False
    after = 0
    for _ in range(params.max_steps):
        while True:
            w_pred, lam_pred = w + ds * tw, lam + ds * tl
            try:
                wn, ln, rn, its = _correct(w_pred, lam_pred, tw, tl, spec, params)
                break
            except NewtonError as exc:
                ds *= 0.5
                log.debug("continuation: step rejected (%s), ds -> %.3g", exc, ds)
                if ds < params.ds_min:
                    raise StepFailure(f"arclength step fell below {params.ds_min:g} at lambda={lam:.6g}") from exc
        # secant tangent, normalised in the same metric
        dw, dl = wn - w, ln - lam
        norm = math.sqrt(max(_x_dot(dw, dw, spec), 0.0) + dl * dl)
        new_tw, new_tl = dw / norm, dl / norm
        if new_tl * tl < 0:
            fold_passed = True
            folds.append(len(out))
            log.info("continuation: fold passed near lambda=%.6g", lam)
        if not lo <= ln <= hi:
            # land on the range end with a fixed-lambda solve from the secant chord
            edge = lo if ln < lo else hi
            t = (edge - lam) / dl
            try:
                we = newton_refine(ScalarField(spec, w + t * dw), edge, tol=params.newton_tol,
                                   symmetrize=params.symmetrize).values
                out.append(_record(we, edge, spec, fold_passed,
                                   residual_norm(en.grad_l2_arr(we, edge, spec), spec)))
            except NewtonError:
                log.info("continuation: could not land on lambda=%.6g", edge)
            break
        tw, tl = new_tw, new_tl
        w, lam = wn, ln
        log.debug("continuation: lambda=%.6g ds=%.3g newton=%d |r|=%.2e", lam, ds, its, rn)
        out.append(_record(w, lam, spec, fold_passed, rn))
        if fold_passed:
            after += 1
            if after >= params.steps_after_fold:
                break
        if its <= 3:
            ds = min(ds * params.grow, params.ds_max)
    return out, folds


def continue_branch(seed: tuple[float, ScalarField], lam_range: tuple[float, float],
                    params: StepParams | None = None, directions: tuple[int, ...] = (-1, 1)) -> Branch:
    """Trace the branch through `seed` across lam_range, by default in both directions.

    `directions` picks the initial sign of dlambda: (-1,) traces only toward
    smaller loads, (1,) only toward larger ones.

    Records run from the low-lambda end to the high-lambda end of the traced
    curve. Records beyond a fold (counted outward from the seed) carry
    is_fold_passed = True.
    """
    params = params or StepParams()
    lam0, w0 = seed
    spec = w0.spec
    lo, hi = lam_range
    if not lo <= lam0 <= hi:
        raise ValueError("seed lambda outside the requested range")
    w = _sym(w0.values, params.symmetrize)
    r = en.grad_l2_arr(w, lam0, spec)
    if residual_norm(r, spec) > params.newton_tol:
        w = newton_refine(ScalarField(spec, w), lam0, tol=params.newton_tol,
                          symmetrize=params.symmetrize).values
    seed_rec = _record(w, lam0, spec, False, residual_norm(en.grad_l2_arr(w, lam0, spec), spec))
    if not directions or any(d not in (-1, 1) for d in directions):
        raise ValueError("directions must be a non-empty subset of (-1, 1)")
    down, folds_d = _trace(w, lam0, lam_range, -1, params, spec) if -1 in directions else ([], [])
    up, folds_u = _trace(w, lam0, lam_range, +1, params, spec) if 1 in directions else ([], [])
    records = down[::-1] + [seed_rec] + up
    nd = len(down)
    folds = sorted([nd - 1 - i for i in folds_d] + [nd + 1 + i for i in folds_u])
    return Branch(records, spec, folds)


# --- V(lambda) fits ---------------------------------------------------------


@dataclass(frozen=True)
class VFit:
    """V(lambda) ~ c1 (2 - lambda)^p + c2 (2 - lambda)^q with p, q >= 1, c1, c2 >= 0."""
    c1: float
    p: float
    c2: float
    q: float
    form: str = "c1*(2-lambda)^p + c2*(2-lambda)^q, p,q>=1, c1,c2>=0 (least squares in log V)"

    def __call__(self, lam):
        d = 2.0 - np.asarray(lam, dtype=float)
        return self.c1 * d**self.p + self.c2 * d**self.q

    def as_dict(self) -> dict:
        return {"c1": self.c1, "p": self.p, "c2": self.c2, "q": self.q, "form": self.form}


def fit_v_curve(lams, levels) -> VFit:
    """Monotone two-term power fit of V against 2 - lambda."""
    lams = np.asarray(lams, dtype=float)
    v = np.asarray(levels, dtype=float)
    if lams.size < 2 or np.any(v <= 0) or np.any(lams >= 2):
        raise ValueError("need at least two samples with V > 0 and lambda < 2")
    d = 2.0 - lams
    p0 = max(1.0, float(np.polyfit(np.log(d), np.log(v), 1)[0]))

    def resid(x):
        c1, p, c2, q = x
        return np.log(c1 * d**p + c2 * d**q + 1e-300) - np.log(v)

    x0 = [float(np.exp(np.mean(np.log(v) - p0 * np.log(d)))), p0, 1e-6, p0 + 1.0]
    sol = least_squares(resid, x0, bounds=([0, 1, 0, 1], [np.inf, 12, np.inf, 12]))
    c1, p, c2, q = (float(t) for t in sol.x)
    return VFit(c1, p, c2, q)


def near_two_exponent(lams, levels) -> float:
    """Exponent p of V ~ c (2 - lambda)^p over the last decade of 2 - lambda.

    Uses the samples whose 2 - lambda lies within a factor 10 of the
    smallest computed value.
    """
    d = 2.0 - np.asarray(lams, dtype=float)
    v = np.asarray(levels, dtype=float)
    sel = d <= 10.0 * d.min()
    if sel.sum() < 2:
        raise ValueError("need two samples in the last decade")
    return float(np.polyfit(np.log(d[sel]), np.log(v[sel]), 1)[0])


# --- domain study -----------------------------------------------------------


@dataclass
class DomainRow:
    lam: float
    a: float
    b: float
    nx: int
    ny: int
    level: float
    x_norm_sq: float
    # max |D2 w - D2 w_ref| / max |D2 w_ref| over the shared centred window, vs the first domain
    d2_discrepancy: float


def _second_derivs(w: np.ndarray, spec: DomainSpec) -> list[np.ndarray]:
    from .grid import dxx_arr as dxx, dyy_arr as dyy, dxy_arr as dxy
    return [dxx(w, spec.hx), dyy(w, spec.hy), dxy(w, spec.hx, spec.hy)]


def _window(spec: DomainSpec, half: float, v: np.ndarray) -> np.ndarray:
    ix = np.abs(spec.x) <= half + 1e-9
    iy = np.abs(spec.y) <= half + 1e-9
    return v[np.ix_(ix, iy)]


def d2_discrepancy(w: ScalarField, ref: ScalarField, half: float) -> float:
    """Relative sup difference of second derivatives on |x|,|y| <= half.

    Both fields must share the grid spacing so the window nodes coincide.
    """
    if not (math.isclose(w.spec.hx, ref.spec.hx) and math.isclose(w.spec.hy, ref.spec.hy)):
        raise ValueError("d2_discrepancy needs equal grid spacings")
    worst = 0.0
    for d, dr in zip(_second_derivs(w.values, w.spec), _second_derivs(ref.values, ref.spec)):
        a, b = _window(w.spec, half, d), _window(ref.spec, half, dr)
        worst = max(worst, float(np.abs(a - b).max() / np.abs(b).max()))
    return worst


def domain_study(lams, domains: list[DomainSpec], solve, window: float = 20.0) -> list[DomainRow]:
    """V(lambda, Omega) table across domains.

    `solve(lam, spec) -> ScalarField` returns a refined critical point (the
    CLI wires in find_w2 + mountain pass). The second-derivative discrepancy
    is reported against the first domain when grid spacings match, else NaN.
    """
    rows = []
    for lam in lams:
        ref = None
        for spec in domains:
            w = solve(lam, spec)
            disc = float("nan")
            if ref is None:
                ref = w
                disc = 0.0
            else:
                try:
                    disc = d2_discrepancy(w, ref, window)
                except ValueError:
                    pass
            rows.append(DomainRow(float(lam), spec.a, spec.b, spec.nx, spec.ny,
                                  en.f_lambda(w, lam), en.x_norm_sq_arr(w.values, spec), disc))
    return rows
