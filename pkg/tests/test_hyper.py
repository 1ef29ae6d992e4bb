import math

import numpy as np
import pytest

from ouevol.coefficients import UsageError, autonomous, builtin
from ouevol.hyper import (alpha_derivative, alpha_value, exponent_path, kappa, kappa_path,
                          log_sobolev_constant, quadratic_form_terms, verify_hypercontractivity,
                          verify_log_sobolev, verify_quadratic_form)
from ouevol.observables import ComplexExponential, ExpSum, Generic, RealExponential
from ouevol.polynomial import Polynomial

x = Polynomial.variable(0, 1)
OU = "scalar_autonomous"


def test_kappa_and_constants_on_stationary_ou():
    field = builtin(OU)
    assert kappa(field, 0.0) == pytest.approx(0.5, rel=1e-9)
    assert log_sobolev_constant(field, 0.0, 2) == pytest.approx(1.0, rel=1e-9)
    assert log_sobolev_constant(field, 0.0, 4) == pytest.approx(2 / 3, rel=1e-9)
    with pytest.raises(UsageError):
        log_sobolev_constant(field, 0.0, 1.0)


def test_kappa_is_invariant_under_noise_scaling():
    # scaling B scales Q by the square, so kappa is unchanged
    for scale in (0.5, 3.0):
        field = autonomous(a=-1.0, b=math.sqrt(2) * scale)
        assert kappa(field, 0.0) == pytest.approx(0.5, rel=1e-9)


def test_kappa_path_matches_pointwise():
    field = builtin("coupled_periodic")
    ts = [1.5, -0.5, 0.2, 1.5]
    np.testing.assert_allclose(kappa_path(field, ts), [kappa(field, t) for t in ts], rtol=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
@pytest.mark.parametrize("phi", [x * x + 1, x * x + x + 1, RealExponential([0.7])],
                         ids=["x2p1", "x2px1", "exp"])
def test_log_sobolev_stationary(p, phi):
    res = verify_log_sobolev(builtin(OU), 0.0, p, phi)
    assert res.converged
    assert res.margin >= -1e-6
    assert abs(res.density_term) <= 1e-9 * max(1.0, abs(res.lhs))


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_exponentials_are_log_sobolev_extremal(p):
    res = verify_log_sobolev(builtin(OU), 0.0, p, RealExponential([0.7]))
    assert abs(res.margin) <= 1e-9


def test_vanishing_observable_is_flagged_unconverged():
    # |x|^p log|x| is not smooth at the origin, so doubling the order moves the integrals
    res = verify_log_sobolev(builtin(OU), 0.0, 2.0, x)
    assert not res.converged
    assert res.max_shift > 1e-7


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic"])
def test_log_sobolev_nonautonomous(name):
    field = builtin(name)
    phis = ([x * x - x + 1.5, RealExponential([0.4])] if field.dim == 1 else
            [Polynomial.variable(0, 2) ** 2 + Polynomial.variable(1, 2) ** 2
             + Polynomial.variable(0, 2) + 0.5, RealExponential([0.3, -0.2])])
    for t in (0.0, 1.1):
        for p in (1.5, 2.0, 4.0):
            for phi in phis:
                res = verify_log_sobolev(field, t, p, phi)
                assert res.converged and res.margin >= -1e-6


def test_log_sobolev_constant_observable_is_equality():
    res = verify_log_sobolev(builtin("scalar_periodic"), 0.3, 2.0, Polynomial.constant(3.0, 1))
    assert abs(res.margin) <= 1e-9


def test_log_sobolev_complex_observable():
    res = verify_log_sobolev(builtin("scalar_periodic"), 0.3, 2.0, ComplexExponential([1.0]))
    assert res.converged and res.margin >= -1e-6


def test_log_sobolev_argument_checks():
    with pytest.raises(UsageError):
        verify_log_sobolev(builtin(OU), 0.0, 1.0, x)
    with pytest.raises(UsageError):
        verify_log_sobolev(builtin(OU), 0.0, 2.0, Polynomial.constant(0.0, 1))


@pytest.mark.parametrize("name", ["scalar_autonomous", "scalar_periodic", "coupled_periodic"])
def test_quadratic_form_identity(name):
    field = builtin(name)
    phis = ([x * x, x - 0.3, RealExponential([0.5])] if field.dim == 1 else
            [Polynomial.variable(0, 2) ** 2 + Polynomial.variable(1, 2)])
    for phi in phis:
        assert verify_quadratic_form(field, 0.7, phi) <= 1e-7


def test_quadratic_form_with_plus_sign_fails():
    qf = quadratic_form_terms(builtin("scalar_periodic"), 0.7, x * x)
    assert abs(qf.energy + qf.dirichlet - qf.density) <= 1e-7
    assert abs(qf.energy + qf.dirichlet + qf.density) > 1e-2


def test_stationary_quadratic_form():
    qf = quadratic_form_terms(builtin(OU), 0.0, x)
    # int x L x = -1, 1/2 int |sqrt2|^2 = 1, no density term
    assert qf.energy == pytest.approx(-1.0, rel=1e-10)
    assert qf.dirichlet == pytest.approx(1.0, rel=1e-10)
    assert abs(qf.density) <= 1e-9


def test_exponent_path_on_stationary_ou():
    s = np.linspace(-3, 1, 9)
    plan = exponent_path(builtin(OU), 1.0, 2.0, s)
    expected = 1 + np.exp(2 * (1.0 - s))
    np.testing.assert_allclose(plan.p_closed, expected, rtol=1e-10)
    np.testing.assert_allclose(plan.p_ode, expected, rtol=1e-8)
    assert plan.p(1.0) == 2.0
    assert plan.lower_bound_ok


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic", "nonnormal_jordan"])
def test_exponent_routes_agree(name):
    plan = exponent_path(builtin(name), 1.0, 2.0, np.linspace(-4, 1, 11))
    assert plan.max_rel_diff <= 1e-8
    assert plan.lower_bound_ok
    assert np.all(np.diff(plan.p_closed) < 0)


def test_exponent_path_argument_checks():
    with pytest.raises(UsageError):
        exponent_path(builtin(OU), 1.0, 1.0, [0.0])
    with pytest.raises(UsageError):
        exponent_path(builtin(OU), 1.0, 2.0, [2.0])


def test_exponential_closed_form_is_equality():
    m = verify_hypercontractivity(builtin(OU), 1.0, 2.0, [0.0], [RealExponential([1.0])])
    (row,) = m.rows
    assert row[4] == pytest.approx(math.e, rel=1e-9)
    assert abs(row[5]) <= 1e-9
    assert row[6] == "closed_form"


def test_constant_observable_is_equality():
    m = verify_hypercontractivity(builtin("scalar_periodic"), 1.0, 2.0, [-2.0, 0.0],
                                  [ExpSum([2.0], np.zeros((1, 1)))])
    assert all(abs(r[5]) <= 1e-12 for r in m.rows)


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic", "nonnormal_jordan"])
def test_hypercontractivity_margins(name):
    field = builtin(name)
    n = field.dim
    phis = [RealExponential([0.5] * n), RealExponential([-0.8] + [0.3] * (n - 1)),
            1 + Polynomial.variable(0, n) ** 2]
    m = verify_hypercontractivity(field, 1.0, 2.0, np.linspace(-1, 1, 5), phis)
    assert m.passed


def test_alpha_derivative_on_fixed_exponent():
    for phi in (x * x + x, RealExponential([0.6])):
        analytic, fd = alpha_derivative(builtin("scalar_periodic"), 1.0, 2.0, 0.2, phi,
                                        p_path=lambda _: (3.0, 0.0))
        assert analytic == pytest.approx(fd, rel=1e-4)


def test_alpha_is_nonincreasing_along_theorem_exponent():
    for phi in (x * x + 1, RealExponential([0.6])):
        analytic, fd = alpha_derivative(builtin("scalar_periodic"), 1.0, 2.0, 0.2, phi)
        assert analytic >= -1e-9
        assert fd >= -1e-6


def test_alpha_constant_observable():
    one = Polynomial.constant(2.0, 1)
    analytic, fd = alpha_derivative(builtin(OU), 1.0, 2.0, 0.0, one)
    assert abs(analytic) <= 1e-12 and abs(fd) <= 1e-9
    assert alpha_value(builtin(OU), 1.0, 0.0, one, 3.0) == pytest.approx(2.0)


def test_alpha_derivative_needs_closed_form():
    with pytest.raises(UsageError):
        alpha_derivative(builtin(OU), 1.0, 2.0, 0.0, Generic(np.cos, 1))
