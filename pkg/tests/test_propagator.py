import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.linalg import expm

from ouevol.coefficients import UsageError, autonomous, builtin
from ouevol.propagator import Propagator, compose, get_propagator, is_semisimple


def test_identity_at_equal_times():
    prop = get_propagator(builtin("coupled_periodic"))
    np.testing.assert_array_equal(prop.propagate(0.4, 0.4), np.eye(2))


def test_negative_identity_exponential():
    prop = get_propagator(autonomous(a=-1.0, n=2))
    np.testing.assert_allclose(prop.propagate(0.0, 1.0), math.exp(-1) * np.eye(2),
                               atol=1e-10)


def test_scalar_periodic_over_one_period():
    prop = get_propagator(builtin("scalar_periodic"))
    assert prop.propagate(0.0, 2 * math.pi)[0, 0] == pytest.approx(math.exp(-2 * math.pi),
                                                                   rel=1e-9)


def test_scalar_periodic_half_period_antiderivative():
    prop = get_propagator(builtin("scalar_periodic"))
    # int_0^pi (-1 + sin r) dr = -pi + 2
    assert prop.propagate(0.0, math.pi)[0, 0] == pytest.approx(math.exp(-math.pi + 2),
                                                               rel=1e-9)


def test_backward_propagation_rejected():
    with pytest.raises(UsageError):
        get_propagator(builtin("scalar_periodic")).propagate(1.0, 0.0)


def test_invalid_tolerance():
    with pytest.raises(UsageError):
        Propagator(builtin("scalar_periodic"), ode_tol=-1.0)


def test_floquet_scalar():
    fl = get_propagator(autonomous(a=-1.0, period=1.0)).floquet()
    assert fl.r0 == pytest.approx(math.exp(-1), rel=1e-10)
    assert fl.omega0 == pytest.approx(-1.0, abs=1e-10)


def test_floquet_rotation():
    fl = get_propagator(builtin("rotation_decay")).floquet()
    expected = sorted([np.exp(-1 + 2j), np.exp(-1 - 2j)], key=lambda z: -z.imag)
    np.testing.assert_allclose(fl.multipliers, expected, atol=1e-10)
    assert fl.omega0 == pytest.approx(-1.0, abs=1e-10)
    assert all(fl.semisimple_flags)


def test_floquet_jordan_defective():
    fl = get_propagator(builtin("nonnormal_jordan")).floquet()
    np.testing.assert_allclose(fl.multipliers, [math.exp(-1)] * 2, atol=1e-7)
    assert not any(fl.semisimple_flags)
    assert not fl.top_semisimple


def test_floquet_needs_period():
    with pytest.raises(UsageError):
        get_propagator(builtin("scalar_aperiodic")).floquet()


def test_semisimplicity_rank_test():
    assert is_semisimple(np.diag([math.exp(-1), math.exp(-2)]), math.exp(-1))
    assert not is_semisimple(math.exp(-1) * np.array([[1.0, 1.0], [0.0, 1.0]]), math.exp(-1))


def test_growth_bound_exact_routes():
    assert get_propagator(autonomous(a=-1.0)).estimate_growth_bound() == pytest.approx(-1.0)
    assert get_propagator(builtin("scalar_periodic")).estimate_growth_bound() == pytest.approx(
        -1.0, abs=1e-9)


def test_growth_bound_aperiodic_estimate():
    w = get_propagator(builtin("scalar_aperiodic")).estimate_growth_bound(horizon=20.0)
    assert -1.5 <= w <= -1.0


def test_M_scalar_and_normal():
    assert get_propagator(autonomous(a=-1.0)).estimate_M(-0.5).value == pytest.approx(1.0)
    assert get_propagator(builtin("rotation_decay")).estimate_M(-0.5).value == pytest.approx(
        1.0, abs=1e-9)


@pytest.mark.parametrize("omega", [-0.5, -0.9])
def test_M_jordan_against_brute_force(omega):
    A = np.array([[-1.0, 1.0], [0.0, -1.0]])
    brute = max(np.linalg.norm(expm(A * tau), 2) * math.exp(-omega * tau)
                for tau in np.linspace(0, 60, 6001))
    est = get_propagator(builtin("nonnormal_jordan")).estimate_M(omega).value
    assert est == pytest.approx(brute, rel=1e-4)


def test_M_jordan_exceeds_one_near_growth_bound():
    # log(||e^{A tau}|| e^{-omega tau}) = asinh(tau/2) + (-1 - omega) tau, positive for small
    # tau only once omega < -1/2
    prop = get_propagator(builtin("nonnormal_jordan"))
    assert prop.estimate_M(-0.5).value == pytest.approx(1.0, abs=1e-12)
    assert prop.estimate_M(-0.9).value > 1.0


def test_M_requires_rate_above_growth_bound():
    with pytest.raises(UsageError):
        get_propagator(autonomous(a=-1.0)).estimate_M(-1.5)


def test_M_at_growth_bound_semisimple_only():
    assert get_propagator(builtin("scalar_autonomous")).estimate_M_at_growth_bound().value \
        == pytest.approx(1.0)
    with pytest.raises(UsageError):
        get_propagator(builtin("nonnormal_jordan")).estimate_M_at_growth_bound()


def test_long_horizon_fast_path_matches_direct_integration():
    field = builtin("coupled_periodic")
    prop = get_propagator(field)
    direct = prop._integrate(0.3, 9.1)
    fast = prop.kernel(0.3, 9.1)
    for a, b in zip(direct, fast):
        np.testing.assert_allclose(a, b, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 4), st.floats(0, 4))
def test_cocycle(s, d1, d2):
    prop = get_propagator(builtin("coupled_periodic"))
    r, t = s + d1, s + d1 + d2
    np.testing.assert_allclose(prop.propagate(s, t), prop.propagate(r, t) @ prop.propagate(s, r),
                               atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 6))
def test_autonomous_matches_matrix_exponential(s, lag):
    A = np.array([[-1.0, 1.0], [0.0, -1.0]])
    prop = get_propagator(builtin("nonnormal_jordan"))
    np.testing.assert_allclose(prop.propagate(s, s + lag), expm(lag * A), atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 5))
def test_liouville_determinant(s, lag):
    field = builtin("coupled_periodic")
    prop = get_propagator(field)
    tr, _ = integrate.quad(lambda r: np.trace(field.batch([r])[0][0]), s, s + lag,
                           epsabs=0, epsrel=1e-13)
    assert np.linalg.det(prop.propagate(s, s + lag)) == pytest.approx(math.exp(tr), rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 5))
def test_periodic_shift_invariance(s, lag):
    field = builtin("scalar_periodic")
    prop = get_propagator(field)
    T = field.period
    np.testing.assert_allclose(prop.propagate(s + T, s + lag + T), prop.propagate(s, s + lag),
                               atol=1e-9)


def test_compose_is_associative():
    rng = np.random.default_rng(3)
    ks = [(rng.normal(size=(2, 2)), rng.normal(size=2), np.eye(2) * (i + 1)) for i in range(3)]
    left = compose(ks[2], compose(ks[1], ks[0]))
    right = compose(compose(ks[2], ks[1]), ks[0])
    for a, b in zip(left, right):
        np.testing.assert_allclose(a, b, atol=1e-12)
