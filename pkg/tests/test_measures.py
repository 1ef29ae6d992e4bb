import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ouevol.coefficients import DomainError, UsageError, autonomous, builtin
from ouevol.kernel import gaussian_expectation
from ouevol.measures import (GaussianMeasure, NoEntranceLaw, density_time_logderivative,
                             entrance_law, entrance_path, kernel_by_quadrature, log_density,
                             transition_kernel)
from ouevol.propagator import compose, get_propagator

SQRT2 = math.sqrt(2.0)


def test_scalar_kernel_closed_form():
    k = transition_kernel(builtin("scalar_autonomous"), 0.0, 1.0)
    assert k.U[0, 0] == pytest.approx(math.exp(-1), rel=1e-10)
    assert k.g[0] == 0.0
    assert k.Q[0, 0] == pytest.approx(1 - math.exp(-2), rel=1e-10)


def test_empty_interval_kernel():
    k = transition_kernel(builtin("coupled_periodic"), 0.7, 0.7)
    np.testing.assert_array_equal(k.U, np.eye(2))
    assert not k.g.any() and not k.Q.any()


def test_forced_mean_tends_to_one():
    k = transition_kernel(autonomous(a=-1.0, b=SQRT2, f=1.0), 0.0, 40.0)
    assert k.g[0] == pytest.approx(1.0, abs=1e-12)


def test_kernel_rejects_reversed_times():
    with pytest.raises(UsageError):
        transition_kernel(builtin("scalar_periodic"), 1.0, 0.0)


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic", "nonnormal_jordan"])
def test_kernel_matches_defining_integrals(name):
    field = builtin(name)
    a = transition_kernel(field, -0.6, 2.9)
    b = kernel_by_quadrature(field, -0.6, 2.9)
    np.testing.assert_allclose(a.Q, b.Q, rtol=1e-8)
    np.testing.assert_allclose(a.g, b.g, rtol=1e-8, atol=1e-15)


def test_forced_kernel_matches_defining_integrals():
    field = builtin("scalar_periodic", f=1.0)
    a = transition_kernel(field, 0.0, 3.0)
    b = kernel_by_quadrature(field, 0.0, 3.0)
    np.testing.assert_allclose([a.g[0], a.Q[0, 0]], [b.g[0], b.Q[0, 0]], rtol=1e-9)


def test_stationary_entrance_law():
    law = entrance_law(builtin("scalar_autonomous"), 3.0)
    assert law.mean[0] == pytest.approx(0.0, abs=1e-14)
    assert law.cov[0, 0] == pytest.approx(1.0, rel=1e-9)


def test_forced_stationary_entrance_law():
    law = entrance_law(autonomous(a=-1.0, b=SQRT2, f=1.0), 0.0)
    assert law.mean[0] == pytest.approx(1.0, rel=1e-9)
    assert law.cov[0, 0] == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("t", [0.0, 1.1, 4.0])
def test_scalar_periodic_variance_by_direct_quadrature(t):
    from scipy import integrate
    # Q(t, -inf) = int_{-inf}^t exp(2 (-(t - r) + cos r - cos t)) dr for a = -1 + sin, b = 1
    val, _ = integrate.quad(lambda r: math.exp(2 * (-(t - r) + math.cos(r) - math.cos(t))),
                            -np.inf, t, epsabs=0, epsrel=1e-12, limit=500)
    law = entrance_law(builtin("scalar_periodic"), t)
    assert law.cov[0, 0] == pytest.approx(val, rel=1e-8)


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic", "rotation_decay"])
def test_stein_and_truncation_routes_agree(name):
    field = builtin(name)
    for t in (0.0, 0.9):
        a = entrance_law(field, t, route="periodic_fixed_point")
        b = entrance_law(field, t, route="truncation")
        np.testing.assert_allclose(a.cov, b.cov, atol=1e-8)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-8)


def test_fixed_point_route_needs_period():
    with pytest.raises(UsageError):
        entrance_law(builtin("scalar_aperiodic"), 0.0, route="periodic_fixed_point")


def test_unstable_field_has_no_entrance_law():
    with pytest.raises(NoEntranceLaw):
        entrance_law(autonomous(a=0.5), 0.0)


def test_entrance_path_matches_pointwise_laws():
    field = builtin("coupled_periodic")
    times = [0.0, 0.5, 1.7, 3.0]
    for law in entrance_path(field, times):
        ref = entrance_law(field, law.t)
        np.testing.assert_allclose(law.cov, ref.cov, atol=1e-9)
        np.testing.assert_allclose(law.mean, ref.mean, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(-4, 4), st.floats(0, 5))
def test_flow_property(s, lag):
    field = builtin("coupled_periodic")
    prop = get_propagator(field)
    ls, lt = entrance_law(prop, s), entrance_law(prop, s + lag)
    _, g, Q = compose(prop.kernel(s, s + lag), (np.eye(2), ls.mean, ls.cov))
    np.testing.assert_allclose(g, lt.mean, atol=1e-8)
    np.testing.assert_allclose(Q, lt.cov, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(-10, 10))
def test_entrance_law_is_periodic(t):
    field = builtin("coupled_periodic")
    a, b = entrance_law(field, t), entrance_law(field, t + field.period)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-8)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-8)


def test_log_density_values():
    assert log_density(GaussianMeasure([0.0], [[1.0]]), [0.0]) == pytest.approx(
        -0.5 * math.log(2 * math.pi))
    assert log_density(GaussianMeasure([0.0, 0.0], np.eye(2)), [1.0, 1.0]) == pytest.approx(
        -math.log(2 * math.pi) - 1)
    assert log_density(GaussianMeasure([1.0], [[4.0]]), [3.0]) == pytest.approx(
        -0.5 * math.log(8 * math.pi) - 0.5)


def test_log_density_singular_covariance():
    with pytest.raises(DomainError):
        log_density(GaussianMeasure([0.0, 0.0], np.diag([1.0, 0.0])), [0.0, 0.0])


def test_gaussian_measure_rejects_asymmetric_or_negative():
    with pytest.raises(ValueError):
        GaussianMeasure([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        GaussianMeasure([0.0], [[-1e-3]])


def test_tiny_negative_eigenvalue_is_clipped():
    m = GaussianMeasure([0.0], [[-1e-14]])
    assert m.cov[0, 0] == 0.0


def test_stationary_density_is_time_independent():
    x = np.linspace(-3, 3, 7)[:, None]
    np.testing.assert_allclose(density_time_logderivative(builtin("scalar_autonomous"), 0.4, x),
                               0.0, atol=1e-9)


@pytest.mark.parametrize("t", [0.3, 2.0, 5.1])
def test_density_derivative_against_finite_difference(t):
    field = builtin("scalar_periodic")
    h = 1e-4
    x = np.array([[-1.3], [0.2], [2.5]])
    exact = density_time_logderivative(field, t, x)
    fd = (log_density(entrance_law(field, t + h).law, x)
          - log_density(entrance_law(field, t - h).law, x)) / (2 * h)
    np.testing.assert_allclose(exact, fd, rtol=1e-6)


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic"])
def test_density_derivative_integrates_to_zero(name):
    field = builtin(name)
    law = entrance_law(field, 0.8)
    total = gaussian_expectation(law.law, lambda X: density_time_logderivative(field, 0.8, X,
                                                                                law=law))
    assert abs(total) <= 1e-10


def test_sampling_is_reproducible():
    m = GaussianMeasure([1.0, -1.0], [[2.0, 0.3], [0.3, 1.0]])
    a = m.sample(np.random.default_rng(5), 10)
    b = m.sample(np.random.default_rng(5), 10)
    np.testing.assert_array_equal(a, b)
