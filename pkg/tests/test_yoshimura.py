import numpy as np
import pytest
from hypothesis import given, strategies as st

from cylbuckle import yoshimura as yo
from cylbuckle.grid import DomainSpec, symmetrize_arr

deltas = st.floats(0.01, 0.249)


@given(deltas)
def test_profile_anchors(delta):
    f, fp, fpp = yo.f_profile(delta, np.array([0.0, 1.0]))
    assert f[0] == 0 and fp[0] == 0
    assert f[1] == pytest.approx(0.25, abs=1e-15)


@given(st.floats(0.01, 0.199))
def test_profile_derivative_jump_per_period(delta):
    _, fp, _ = yo.f_profile(delta, np.array([0.3, 1.3]))
    assert fp[1] - fp[0] == pytest.approx(0.5, abs=1e-14)


@given(deltas, st.lists(st.floats(-3, 3), min_size=1, max_size=20))
def test_profile_even(delta, s):
    s = np.array(s)
    assert np.array_equal(yo.f_profile(delta, s)[0], yo.f_profile(delta, -s)[0])


@given(deltas)
def test_profile_derivatives_consistent(delta):
    s = np.linspace(-1.7, 1.7, 2001)
    f, fp, fpp = yo.f_profile(delta, s)
    h = 1e-6
    fd = (yo.f_profile(delta, s + h)[0] - yo.f_profile(delta, s - h)[0]) / (2 * h)
    assert np.abs(fd - fp).max() < 1e-6
    a = np.abs(s - np.round(s))
    assert np.all(fpp[a < delta - 1e-9] == pytest.approx(1 / (4 * delta)))
    assert np.all(fpp[a > delta + 1e-9] == 0)


def test_params_validation():
    with pytest.raises(ValueError):
        yo.YoshimuraParams(0.25)
    with pytest.raises(ValueError):
        yo.f_profile(0.0, 0.1)


@pytest.fixture(scope="module")
def tiled():
    spec = DomainSpec(1.0, 1.0, 256, 256)
    return yo.build_w_delta(yo.YoshimuraParams(0.125, 2, 2), spec)


def test_w_delta_periodic_and_even(tiled):
    w = tiled.values
    n = 128  # nodes per unit cell
    # w(1/2, y) = w(-1/2, y) and unit periodicity in x
    assert np.allclose(w[n // 2 + n], w[n // 2], atol=1e-13)
    assert np.allclose(w[:n + 1], w[n:], atol=1e-13)
    # crooked periodicity w(x + 1/2, y + 1/2) = w(x, y)
    assert np.allclose(w[n // 2:n // 2 + n + 1], np.roll(w[:n + 1], -n // 2, axis=1), atol=1e-13)
    assert np.allclose(w, symmetrize_arr(w), atol=1e-13)


def test_incompatible_tiling():
    with pytest.raises(yo.IncompatibleTiling):
        yo.build_w_delta(yo.YoshimuraParams(0.125, 2, 2), DomainSpec(1.5, 1.0, 256, 256))
    with pytest.raises(yo.IncompatibleTiling):
        yo.build_w_delta(yo.YoshimuraParams(0.125, 3, 2), DomainSpec(1.5, 1.0, 256, 256))


def test_cell_gauss_curvature_integral_vanishes():
    ci = yo.cell_integrals(0.125)
    assert abs(ci.rhs_mean) < 1e-10


def test_under_resolved():
    with pytest.raises(yo.UnderResolved):
        yo.cell_integrals(0.125, 64)
    assert yo.min_nodes(0.125) == 128


def test_scaling_report_shape():
    rows = yo.scaling_report([0.125, 0.0625])
    assert np.isnan(rows[0].slope_dw2) and np.isfinite(rows[1].slope_dw2)
    with pytest.raises(ValueError):
        yo.scaling_report([0.0625, 0.125])


def test_q_from_cell_matches_direct_quotient():
    # Q from the stretched-cell formula equals the quotient of the quadratic-plus-Airy integrals
    eps = 1e-2
    delta = eps ** (2 / 3)
    ci = yo.cell_integrals(delta)
    q = yo.q_from_cell(eps, ci)
    assert q == pytest.approx((eps * ci.int_dw2 + ci.int_dphi2 / eps) / ci.int_wx2, rel=1e-15)
    rows = yo.q_epsilon([eps])
    assert rows[0].q == pytest.approx(q, rel=1e-12)


def test_q_quadratic_amplitude_invariant():
    eps = 1e-2
    delta = eps ** (2 / 3)
    n = yo.min_nodes(delta)
    q1 = yo._q_quadratic(eps, delta, n, amplitude=1.0)
    q2 = yo._q_quadratic(eps, delta, n, amplitude=7.5)
    assert q1 == pytest.approx(q2, rel=1e-12)
