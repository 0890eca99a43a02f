import numpy as np
import pytest
from hypothesis import given, strategies as st

from cylbuckle import airy, energy as en
from cylbuckle.energy import GradientMetric
from cylbuckle.grid import DomainSpec, ScalarField, inner_arr, laplacian_arr, shortening_arr

from conftest import SMALL, smooth_field

seeds = st.integers(0, 2**32 - 1)


def field(seed, amplitude=1.0, spec=SMALL):
    return ScalarField(spec, smooth_field(spec, seed, amplitude))


def test_zero_field():
    b = en.breakdown(ScalarField.zeros(SMALL), 1.3)
    assert (b.e2, b.e3, b.e4, b.e_total, b.shortening_s, b.f_lambda, b.x_norm_sq) == (0, 0, 0, 0, 0, 0, 0)
    assert np.all(en.gradient(ScalarField.zeros(SMALL), 1.3).values == 0)
    assert en.sharp_inequality_gap(ScalarField.zeros(SMALL)) == 0


def test_single_mode_closed_form():
    spec = DomainSpec(10, 10, 32, 32)
    k, l, A = 3, 2, 1e-3
    w = en.mode_field(spec, k, l) * A
    kd2, mu4 = spec.kx2[k], (spec.kx2[k] + spec.ky2[l]) ** 2
    b = en.breakdown(w, 0.0)
    assert b.e2 == pytest.approx(0.5 * (mu4 + kd2**2 / mu4) * A**2 * spec.area / 4, rel=1e-12)
    assert b.shortening_s == pytest.approx(0.5 * kd2 * A**2 * spec.area / 4, rel=1e-12)


def test_linearised_gradient_of_mode():
    spec = DomainSpec(10, 10, 32, 32)
    k, l, A, lam = 3, 2, 1e-6, 1.0
    w = en.mode_field(spec, k, l) * A
    kd2, mu4 = spec.kx2[k], (spec.kx2[k] + spec.ky2[l]) ** 2
    g = en.gradient(w, lam, GradientMetric.L2).values
    lin = (mu4 + kd2**2 / mu4 - lam * kd2) * w.values
    assert np.abs(g - lin).max() <= 1e-4 * np.abs(lin).max()


@given(seeds, st.sampled_from([-1.0, 0.5, 2.0, 10.0]))
def test_homogeneity(seed, mu):
    w = field(seed, 2.0)
    b, bm = en.breakdown(w, 0.0), en.breakdown(w * mu, 0.0)
    assert bm.e2 == pytest.approx(mu**2 * b.e2, rel=1e-10)
    assert bm.e3 == pytest.approx(mu**3 * b.e3, rel=1e-10)
    assert bm.e4 == pytest.approx(mu**4 * b.e4, rel=1e-10)


@given(seeds)
def test_breakdown_consistency(seed):
    w = field(seed, 3.0)
    b = en.breakdown(w, 1.2)
    assert b.e_total == pytest.approx(b.e2 + b.e3 + b.e4, rel=1e-12)
    assert b.e_total == pytest.approx(en.energy(w), rel=1e-10)
    assert b.e2 == pytest.approx(0.5 * b.x_norm_sq, rel=1e-15)
    assert b.e4 >= 0
    assert b.f_lambda == pytest.approx(b.e_total - 1.2 * b.shortening_s, rel=1e-12, abs=1e-12)


@given(seeds)
def test_sharp_inequality(seed):
    w = field(seed)
    assert en.sharp_inequality_gap(w) >= -1e-10 * en.x_norm(w) ** 2


def test_sharp_inequality_near_equality():
    spec = DomainSpec(50, 50, 128, 128)
    _, (k, l) = en.linear_critical_load(spec)
    w = en.mode_field(spec, k, l)
    assert en.sharp_inequality_gap(w) / en.x_norm(w) ** 2 <= 1e-6


@given(seeds)
def test_chain_identity(seed):
    w = field(seed).values
    lhs = 2 * shortening_arr(w, SMALL)
    rhs = inner_arr(laplacian_arr(w, SMALL.hx, SMALL.hy),
                    laplacian_arr(airy.phi1_arr(w, SMALL), SMALL.hx, SMALL.hy), SMALL)
    assert lhs == pytest.approx(rhs, rel=1e-10)


@given(seeds)
def test_gradient_matches_finite_differences(seed):
    w, v = field(seed, 2.0), field(seed + 1)
    lam = 1.5
    an = inner_arr(en.gradient(w, lam, GradientMetric.L2).values, v.values, SMALL)
    err = {}
    for h in (1e-3, 1e-4):
        fd = (en.f_lambda(w + v * h, lam) - en.f_lambda(w - v * h, lam)) / (2 * h)
        err[h] = abs(fd - an) / abs(an)
    assert err[1e-4] <= 1e-5
    # central differences: the error must fall like h^2 until it reaches roundoff
    assert err[1e-4] <= max(err[1e-3] / 50, 1e-7)


@given(seeds)
def test_hessian_matches_finite_differences(seed):
    w, v = field(seed, 2.0), field(seed + 1)
    h, lam = 1e-4, 1.5
    fd = (en.grad_l2_arr(w.values + h * v.values, lam, SMALL)
          - en.grad_l2_arr(w.values - h * v.values, lam, SMALL)) / (2 * h)
    an = en.hessian_action(w, v, lam).values
    assert np.linalg.norm(fd - an) <= 1e-5 * np.linalg.norm(an)


@given(seeds)
def test_metrics_vanish_together(seed):
    w = field(seed, 2.0)
    lo, hi = en.metric_condition(SMALL)
    gl2 = en.gradient_norm(w, 1.5, GradientMetric.L2)
    gx = en.gradient_norm(w, 1.5, GradientMetric.X_PRECONDITIONED)
    assert lo * gl2 * (1 - 1e-9) <= gx <= hi * gl2 * (1 + 1e-9)


@given(seeds)
def test_cubic_term_constant_is_scale_free(seed):
    w = field(seed)
    c = [abs(en.breakdown(w * mu, 0).e3) / (mu**3 * en.x_norm(w) ** 3) for mu in (0.5, 1.0, 4.0)]
    assert np.all(np.isfinite(c))
    assert max(c) <= 1.2 * min(c) + 1e-300


def test_linear_critical_load_two_routes():
    spec = DomainSpec(50, 50, 128, 128)
    lam_cr, (k, l) = en.linear_critical_load(spec)
    assert abs(lam_cr - 2.0) <= 0.05
    # the symbol table against energies evaluated through the stencils
    table = en.mode_load_table(spec)
    for kk, ll in [(k, l), (k + 1, l), (k, l + 1), (k - 1, l), (4, 3)]:
        b = en.breakdown(en.mode_field(spec, kk, ll), 0.0)
        assert b.e2 / b.shortening_s == pytest.approx(table[kk, ll], rel=1e-10)
