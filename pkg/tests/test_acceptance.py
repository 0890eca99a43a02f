"""Acceptance criteria 1-9.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary. Run directly with ``python tests/test_acceptance.py``.
Criteria 1, 4, 6, 7 and 8 share one mountain-pass anchor computed per session.
"""
import math
import sys

import numpy as np
import pytest
import sympy as sp

from cylbuckle import airy, calibrate as cal, continuation as co, energy as en, flows
from cylbuckle import mountain_pass as mp, yoshimura as yo
from cylbuckle.energy import GradientMetric
from cylbuckle.grid import (
    DomainSpec,
    ScalarField,
    apply_symbol,
    dxx_arr,
    dyy_arr,
    inner_arr,
    laplacian_arr,
    project_zero_mean_arr,
    shortening_arr,
    symmetrize_arr,
)

from conftest import ACCEPTANCE_LINES as RESULTS, rough_field, smooth_field

ANCHOR_LAM = 1.5
ANCHOR_SPEC = DomainSpec(50.0, 50.0, 128, 128)


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)


def solve_mp(lam: float, spec: DomainSpec) -> mp.MpResult:
    w2 = flows.find_w2(lam, spec=spec)
    return mp.run_mountain_pass(lam, w2)


@pytest.fixture(scope="session")
def anchor() -> mp.MpResult:
    return solve_mp(ANCHOR_LAM, ANCHOR_SPEC)


# --- 1 ----------------------------------------------------------------------


def test_criterion_1_mountain_pass_level(anchor):
    level = anchor.level_c
    rel = abs(level - 4.84) / 4.84
    ok = rel <= 0.15 and anchor.grad_norm <= 1e-6
    report(1, ok, f"F(w_MP) = {level:.6g} vs 4.84 +/- 15% (rel. dev. {rel:.1%}), |g|_X = {anchor.grad_norm:.2e}")
    assert ok


def test_anchor_single_dimple_is_localized(anchor):
    assert mp.localization_ratio(anchor.w_mp) <= 0.05


# --- 2 ----------------------------------------------------------------------


def test_criterion_2_linear_critical_load():
    spec = ANCHOR_SPEC
    lam_cr, (k, l) = en.linear_critical_load(spec)
    # second route: the same quotient evaluated through the stencils on the mode field itself
    b = en.breakdown(en.mode_field(spec, k, l), 0.0)
    lam_field = b.e2 / b.shortening_s
    # closed-form discrete symbols for the oracle
    kx2 = 4 / spec.hx**2 * np.sin(np.pi * np.arange(spec.nx + 1) / (2 * spec.nx)) ** 2
    ky2 = 4 / spec.hy**2 * np.sin(np.pi * np.arange(spec.ny // 2 + 1) / spec.ny) ** 2
    mu2 = kx2[:, None] + ky2[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        table = (mu2**2 + kx2[:, None] ** 2 / mu2**2) / kx2[:, None]
    table[0, :] = np.inf
    lam_oracle = float(np.min(table))
    ok = abs(lam_cr - 2) <= 0.05 and math.isclose(lam_cr, lam_oracle, rel_tol=1e-12) \
        and math.isclose(lam_field, lam_cr, rel_tol=1e-10)
    report(2, ok, f"lambda_cr = {lam_cr:.8f} at mode ({k},{l}); oracle {lam_oracle:.8f}; "
                  f"stencil quotient {lam_field:.8f}; |lambda_cr - 2| = {abs(lam_cr - 2):.2e}")
    assert ok


# --- 3 ----------------------------------------------------------------------


def test_criterion_3_invariant_suite():
    spec = DomainSpec(20.0, 20.0, 32, 32)
    hx, hy = spec.hx, spec.hy
    worst = dict.fromkeys(("sbp", "homog", "grad", "airy", "chain"), 0.0)
    worst["gap"] = math.inf
    for seed in range(100):
        f, g = rough_field(spec, seed), rough_field(spec, seed + 1000)
        for op in (lambda v: dxx_arr(v, hx), lambda v: dyy_arr(v, hy)):
            scale = math.sqrt(inner_arr(op(f), op(f), spec) * inner_arr(g, g, spec))
            worst["sbp"] = max(worst["sbp"], abs(inner_arr(op(f), g, spec) - inner_arr(f, op(g), spec)) / scale)
        w = ScalarField(spec, smooth_field(spec, seed, 2.0))
        b = en.breakdown(w, 0.0)
        for mu in (-1.0, 0.5, 2.0, 10.0):
            bm = en.breakdown(w * mu, 0.0)
            for got, ref in ((bm.e2, mu**2 * b.e2), (bm.e3, mu**3 * b.e3), (bm.e4, mu**4 * b.e4)):
                worst["homog"] = max(worst["homog"], abs(got - ref) / abs(ref))
        worst["gap"] = min(worst["gap"], en.sharp_inequality_gap(w) / en.x_norm(w) ** 2)
        v = ScalarField(spec, smooth_field(spec, seed + 2000))
        an = inner_arr(en.gradient(w, 1.5, GradientMetric.L2).values, v.values, spec)
        for h in (1e-3, 1e-4):
            fd = (en.f_lambda(w + v * h, 1.5) - en.f_lambda(w - v * h, 1.5)) / (2 * h)
            worst["grad"] = max(worst["grad"], abs(fd - an) / abs(an))
        rhs = project_zero_mean_arr(f, spec)
        phi = airy.solve_biharmonic_arr(rhs, spec)
        res = laplacian_arr(laplacian_arr(phi, hx, hy), hx, hy) - rhs
        worst["airy"] = max(worst["airy"], math.sqrt(inner_arr(res, res, spec) / inner_arr(rhs, rhs, spec)))
        s2 = 2 * shortening_arr(w.values, spec)
        chain = inner_arr(laplacian_arr(w.values, hx, hy), laplacian_arr(airy.phi1_arr(w.values, spec), hx, hy), spec)
        worst["chain"] = max(worst["chain"], abs(s2 - chain) / abs(s2))
    ok = (worst["sbp"] <= 1e-12 and worst["homog"] <= 1e-10 and worst["gap"] >= -1e-10
          and worst["grad"] <= 1e-5 and worst["airy"] <= 1e-10 and worst["chain"] <= 1e-10)
    report(3, ok, "100 fields each; worst: SBP {sbp:.1e}, homogeneity {homog:.1e}, gap/|w|^2 {gap:.1e}, "
                  "gradient FD {grad:.1e}, Airy residual {airy:.1e}, 2S identity {chain:.1e}".format(**worst))
    assert ok


# --- 4 ----------------------------------------------------------------------


def test_criterion_4_origin_is_local_minimum():
    spec = ANCHOR_SPEC
    rho, lam = 1e-2, 1.5
    rng = np.random.default_rng(20240)
    fails, fmin = 0, math.inf
    for _ in range(100):
        # white noise smoothed by (1 + mu^2)^-1, then scaled to the target X norm
        v = project_zero_mean_arr(rng.standard_normal(spec.shape), spec)
        v = apply_symbol(v, 1.0 / (1.0 + spec.mu2))
        w = ScalarField(spec, v * (rho / math.sqrt(en.x_norm_sq_arr(v, spec))))
        f = en.f_lambda(w, lam)
        fmin = min(fmin, f)
        fails += int(not f > 0)
    ok = fails == 0
    report(4, ok, f"lambda=1.5, |w|_X=1e-2, 100 random directions: {fails} with F <= 0 (min F = {fmin:.3e})")
    assert ok


# --- 5 ----------------------------------------------------------------------


def test_criterion_5_yoshimura_scalings():
    rows = yo.scaling_report([1 / 8, 1 / 16, 1 / 32])
    wx2 = [r.int_wx2 for r in rows]
    variation = (max(wx2) - min(wx2)) / min(wx2)
    s_dw = [r.slope_dw2 for r in rows[1:]]
    s_dphi = [r.slope_dphi2 for r in rows[1:]]
    q = yo.q_epsilon([1e-2, 1e-3, 3e-4], n_max=4096)
    qs = [r.q for r in q]
    checks = {
        "int w_x^2 variation < 10%": variation < 0.10,
        "lap w slopes in [0.85, 1.15]": all(0.85 <= s <= 1.15 for s in s_dw),
        "lap phi slopes >= 1.5": all(s >= 1.5 for s in s_dphi),
        "Q strictly decreasing": all(b < a for a, b in zip(qs, qs[1:])),
        "final Q < 2": qs[-1] < 2,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(5, ok, f"int w_x^2 = {', '.join(f'{x:.4f}' for x in wx2)} (variation {variation:.0%}); "
                  f"lap w slopes {', '.join(f'{s:.3f}' for s in s_dw)}; "
                  f"lap phi slopes {', '.join(f'{s:.3f}' for s in s_dphi)}; "
                  f"Q(eps=1e-2,1e-3,3e-4) = {', '.join(f'{x:.3f}' for x in qs)}"
                  + (f"; failing: {'; '.join(failed)}" if failed else ""))
    assert ok


# --- 6 ----------------------------------------------------------------------


def test_criterion_6_branch(anchor):
    params = co.StepParams()
    branch = co.continue_branch((ANCHOR_LAM, anchor.w_mp), (1.0, 1.8), params)
    lams, levels = branch.lambdas, branch.levels
    decreasing = bool(np.all(np.diff(lams) > 0) and np.all(np.diff(levels) < 0)) and not branch.folds
    p = co.near_two_exponent(lams, levels)
    # fold: trace from the low end of the window toward smaller loads
    low = branch.records[0]
    below = co.continue_branch((low.lam, low.w), (0.3, low.lam), params, directions=(-1,))
    recs = below.records[::-1]  # in tracing order, starting at the window edge
    fold_ok = False
    fold_lam = float("nan")
    if below.folds:
        k = next(i for i, r in enumerate(recs) if r.is_fold_passed)
        fold_lam = recs[k - 1].lam
        after = recs[k - 1:]
        lam_up = all(b.lam > a.lam for a, b in zip(after[1:], after[2:]))
        norm_up = all(b.x_norm_sq > a.x_norm_sq for a, b in zip(recs, recs[1:]))
        fold_ok = lam_up and norm_up and len(after) >= 3
    ok = decreasing and p >= 2.5 and fold_ok
    report(6, ok, f"{len(lams)} records on [{lams[0]:.3f}, {lams[-1]:.3f}], V strictly decreasing: {decreasing}; "
                  f"V from {levels[0]:.4g} to {levels[-1]:.4g}; near-2 exponent p = {p:.3f} (need >= 2.5); "
                  f"fold near lambda = {fold_lam:.4f} with lambda reversing and |w|^2 growing: {fold_ok}")
    assert ok


# --- 7 ----------------------------------------------------------------------


def test_criterion_7_domain_insensitivity(anchor):
    h = ANCHOR_SPEC.hx

    def spec(a, b):
        return DomainSpec(a, b, 2 * round(a / h), 2 * round(b / h))

    v50 = anchor.level_c
    v100 = solve_mp(ANCHOR_LAM, spec(100, 100)).level_c
    v_ab = solve_mp(ANCHOR_LAM, spec(100, 200)).level_c
    v_ba = solve_mp(ANCHOR_LAM, spec(200, 100)).level_c
    d1 = abs(v50 - v100) / v100
    d2 = abs(v_ab - v_ba) / v_ba
    ok = d1 <= 0.05 and d2 <= 0.05
    report(7, ok, f"V(1.5): 50x50 {v50:.5g} vs 100x100 {v100:.5g} ({d1:.2%}); "
                  f"100x200 {v_ab:.5g} vs 200x100 {v_ba:.5g} ({d2:.2%})")
    assert ok


# --- 8 ----------------------------------------------------------------------


def test_criterion_8_two_sided_escape(anchor):
    rep = mp.verify_mountain_pass(anchor, ANCHOR_LAM)
    ok = rep.ok
    report(8, ok, f"lowest eigenvalue {rep.eigenvalue:.4g}; minus side {rep.minus_outcome} "
                  f"(F={rep.minus_final_f:.4g}, |w|_X={rep.minus_final_xnorm:.4g}); plus side {rep.plus_outcome} "
                  f"(F={rep.plus_final_f:.4g}, |w|_X={rep.plus_final_xnorm:.4g}); |w_MP|_X={rep.xnorm_mp:.4g}")
    assert ok


# --- 9 ----------------------------------------------------------------------


def test_criterion_9_calibration_algebra():
    rng = np.random.default_rng(9)
    ratio_err = 0.0
    for _ in range(200):
        r = rng.uniform(10, 1000)
        g = cal.ShellGeometry(r, rng.uniform(0.01, 1) * r / 20, rng.uniform(1, 1e4), rng.uniform(1e9, 3e11),
                              rng.uniform(0.05, 0.49))
        lam, v = rng.uniform(0.5, 1.99), rng.uniform(0.01, 50)
        ratio = cal.beta_of(g, lam, v) / cal.alpha_of(g, lam, v)
        ratio_err = max(ratio_err, abs(ratio / (g.length_L / (2 * math.pi * g.radius_R)) - 1))

    lams = np.linspace(1.0, 1.8, 9)
    vcurve = cal.VCurve.with_fit(lams, 15.0 * (2 - lams) ** 2.5)
    iso_err = 0.0
    for p in cal.iso_curve(vcurve, 0.3, "alpha", 1.0, "Lt", np.linspace(1.0, 1.95, 20)):
        v, _ = vcurve(p.lam)
        g = cal.ShellGeometry(1.0, 0.5, 0.5 * p.geom_ratio, 1.0, 0.3)
        iso_err = max(iso_err, abs(cal.alpha_of(g, p.lam, v) - 1.0))

    E, R, t, nu, lam_s = sp.symbols("E R t nu lambda", positive=True)
    eps = t / (8 * sp.sqrt(3) * sp.pi**2 * R * sp.sqrt(1 - nu**2))
    oracle = sp.simplify((8 * sp.pi**3 * E * R * t * eps * lam_s) / (2 * sp.pi * E * t**2 / sp.sqrt(3 * (1 - nu**2))))
    lr_err = abs(cal.load_ratio(2.0) - float(oracle.subs(lam_s, 2)))

    spec = DomainSpec(20, 20, 32, 32)
    g = cal.ShellGeometry(250.0, 1.0, 500.0, 7e10, 0.33)
    w = ScalarField(spec, symmetrize_arr(smooth_field(spec, 3, 2.0)))
    level = en.f_lambda(w, 1.3)
    w2, lam2, level2 = cal.from_physical(g, cal.to_physical(g, w, 1.3, level))
    rt_err = max(float(np.max(np.abs(w2.values - w.values)) / np.max(np.abs(w.values))),
                 abs(lam2 / 1.3 - 1), abs(level2 / level - 1))

    ok = ratio_err <= 1e-12 and iso_err <= 1e-10 and lr_err == 0 and rt_err <= 1e-12
    report(9, ok, f"beta/alpha vs L/(2 pi R) {ratio_err:.1e}; iso round trip {iso_err:.1e}; "
                  f"load_ratio(2) = {cal.load_ratio(2.0)} (symbolic {oracle.subs(lam_s, 2)}); "
                  f"dimensional round trip {rt_err:.1e}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
