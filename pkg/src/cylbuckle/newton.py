"""Matrix-free Newton-Krylov refinement of critical points of F_lambda."""
from __future__ import annotations

import logging

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import airy
from . import energy as en
from .grid import DomainSpec, ScalarField, apply_symbol, inner_arr, symmetrize_arr

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    pass


class Diverged(NewtonError):
    pass


class LinearSolveStalled(NewtonError):
    pass


def residual_norm(r: np.ndarray, spec: DomainSpec) -> float:
    return float(np.sqrt(inner_arr(r, r, spec)))


def _sym(v, on):
    return symmetrize_arr(v) if on else v


def jacobian_operator(w: np.ndarray, lam: float, spec: DomainSpec, symmetrize: bool):
    phi = airy.phi_arr(w, spec)
    shape = spec.shape
    n = int(np.prod(shape))

    def mv(u):
        v = _sym(u.reshape(shape), symmetrize)
        return _sym(en.hessian_action_arr(w, v, lam, spec, phi), symmetrize).ravel()

    def prec(u):
        return apply_symbol(u.reshape(shape), spec.inv_x_gram).ravel()

    return LinearOperator((n, n), matvec=mv, dtype=float), LinearOperator((n, n), matvec=prec, dtype=float)


def krylov_solve(A, b, M, rtol, maxiter=400, restart=60):
    x, info = gmres(A, b, M=M, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter)
    if info < 0:
        raise LinearSolveStalled(f"GMRES breakdown (info={info})")
    res = np.linalg.norm(b - A @ x) / max(np.linalg.norm(b), 1e-300)
    if info > 0 and res > 1e-2:
        raise LinearSolveStalled(f"GMRES did not converge (relative residual {res:.2e})")
    return x


def newton_refine(w0: ScalarField, lam: float, tol: float = 1e-10, max_iter: int = 30,
                  symmetrize: bool = True, return_steps: bool = False, history: list | None = None):
    """Newton iteration on the discrete residual of the w-equation.

    The Jacobian action is the exact second variation (matrix-free; the Airy
    coupling makes it dense), linear systems go to GMRES preconditioned by
    the inverse X-Gram symbol. Steps are damped by halving when the residual
    does not decrease.
    """
    spec = w0.spec
    w = _sym(w0.values.copy(), symmetrize)
    r = _sym(en.grad_l2_arr(w, lam, spec), symmetrize)
    rn = residual_norm(r, spec)
    steps = 0
    if history is not None:
        history.append(rn)
    while rn > tol:
        if steps >= max_iter:
            raise Diverged(f"no convergence in {max_iter} Newton steps (|r|={rn:.3e})")
        A, M = jacobian_operator(w, lam, spec, symmetrize)
        eta = min(1e-3, max(rn, 1e-12))
        dw = krylov_solve(A, -r.ravel(), M, rtol=eta).reshape(spec.shape)
        dw = _sym(dw, symmetrize)
        t = 1.0
        while True:
            wt = w + t * dw
            rt = _sym(en.grad_l2_arr(wt, lam, spec), symmetrize)
            rtn = residual_norm(rt, spec)
            if np.isfinite(rtn) and (rtn < rn or rtn <= tol):
                break
            t *= 0.5
            if t < 1e-4:
                if rn < 100 * tol:
                    # at the roundoff floor of the residual
                    log.info("newton: stopping at roundoff floor |r|=%.3e", rn)
                    out = ScalarField(spec, w)
                    return (out, steps) if return_steps else out
                raise Diverged(f"line search failed at |r|={rn:.3e}")
        w, r, rn = wt, rt, rtn
        steps += 1
        if history is not None:
            history.append(rn)
        log.debug("newton step %d: |r| = %.3e (t=%.3g)", steps, rn, t)
    out = ScalarField(spec, w)
    return (out, steps) if return_steps else out
