import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ouevol.coefficients import (BUILTINS, CoefficientField, DomainError, UsageError,
                                 autonomous, builtin, certify, eval_field, fourier_field)


def test_autonomous_evaluates_to_constants():
    A, B, f = eval_field(autonomous(a=-1, b=1, n=1), 3.7)
    assert A.tolist() == [[-1.0]] and B.tolist() == [[1.0]] and f.tolist() == [0.0]


def test_scalar_periodic_drift_vanishes_at_quarter_period():
    A, _, _ = eval_field(builtin("scalar_periodic"), math.pi / 2)
    assert A[0, 0] == 0.0


def test_rotation_matrix_is_constant():
    A, _, _ = eval_field(builtin("rotation_decay", omega=2.0), 12.3)
    np.testing.assert_array_equal(A, [[-1.0, 2.0], [-2.0, -1.0]])


def test_non_finite_time_is_a_domain_error():
    with pytest.raises(DomainError):
        eval_field(builtin("scalar_periodic"), math.inf)


def test_repeated_evaluation_is_identical():
    field = builtin("coupled_periodic")
    a = eval_field(field, 0.77)
    b = eval_field(field, 0.77)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_certificate_unit_noise():
    rep = certify(autonomous(a=-1, b=1), np.linspace(-5, 5, 50))
    assert rep.min_sigma_B == 1.0 and rep.passed


def test_certificate_diagonal_noise_singular_value():
    field = autonomous(a=-1.0, b=np.diag([1.0, 0.5]), n=2)
    assert certify(field, [0.0, 1.0]).min_sigma_B == 0.5


def test_certificate_periodicity_residual():
    rep = certify(builtin("scalar_periodic"), np.linspace(0, 2 * math.pi, 1000))
    assert rep.periodicity_residual <= 1e-12 and rep.periodic_ok


def test_certificate_empty_grid():
    with pytest.raises(UsageError):
        certify(builtin("scalar_periodic"), [])


def test_overstated_ellipticity_is_flagged():
    base = autonomous(a=-1.0, b=1.0)
    liar = CoefficientField("liar", 1, base.A, base.B, base.f, mu0=1.5, normC=2.0, period=1.0)
    assert not certify(liar, np.linspace(0, 1, 10)).mu0_ok


def test_invalid_declared_constants():
    base = autonomous()
    with pytest.raises(UsageError):
        CoefficientField("bad", 1, base.A, base.B, base.f, mu0=2.0, normC=1.0)
    with pytest.raises(UsageError):
        CoefficientField("bad", 1, base.A, base.B, base.f, mu0=0.0, normC=1.0)


def test_unknown_builtin():
    with pytest.raises(UsageError):
        builtin("no_such_field")


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_every_builtin_certifies(name):
    field = builtin(name)
    T = field.period
    grid = np.linspace(-2 * T, 2 * T, 400) if T else np.linspace(-10, 10, 400)
    assert certify(field, grid).passed


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_fourier_field_matches_its_series(t, T, c1, s1):
    field = fourier_field(dim=1, period=T, A0=[[-1.0]], A_cos=[[[c1]]], A_sin=[[[s1]]],
                          B0=[[1.0]], f0=[0.5], f_sin=[[s1]])
    A, B, f = eval_field(field, t)
    w = 2 * math.pi / T
    assert A[0, 0] == pytest.approx(-1 + c1 * math.cos(w * t) + s1 * math.sin(w * t),
                                    abs=1e-14)
    assert f[0] == pytest.approx(0.5 + s1 * math.sin(w * t), abs=1e-14)
    assert B[0, 0] == 1.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50))
def test_periodic_builtins_repeat(t):
    for name in ("scalar_periodic", "coupled_periodic"):
        field = builtin(name)
        a = eval_field(field, t)
        b = eval_field(field, t + field.period)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, atol=1e-12)
