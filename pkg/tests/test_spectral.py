import cmath
import math

import numpy as np
import pytest

from ouevol.coefficients import DomainError, UsageError, autonomous, builtin
from ouevol.kernel import apply_kernel, mean_functional
from ouevol.measures import entrance_law, transition_kernel
from ouevol.polynomial import Polynomial
from ouevol.propagator import get_propagator
from ouevol.spectral import (MAX_GALERKIN_DEGREE, autonomous_spectrum, eigen_residual,
                             galerkin_spectrum, gsharp_lattice, linear_eigenpairs,
                             linear_generalized_pair, semisimplicity)

SQRT2 = math.sqrt(2.0)


def _same_set(a, b, tol=1e-10):
    a, b = list(a), list(b)
    return len(a) == len(b) and all(min(abs(z - w) for w in b) <= tol for z in a)


def test_scalar_eigenfunction_is_identity():
    field = autonomous(a=-1.0, b=SQRT2, period=1.0)
    (pair,) = linear_eigenpairs(field, 0.0)
    assert pair.lam == pytest.approx(math.exp(-1), rel=1e-10)
    assert pair.phi.coefficient((1,)) == pytest.approx(1.0)
    assert abs(pair.phi.coefficient((0,))) <= 1e-14


def test_forced_eigenfunction_is_shifted():
    field = autonomous(a=-1.0, b=SQRT2, f=1.0, period=1.0)
    (pair,) = linear_eigenpairs(field, 0.0)
    assert pair.phi.coefficient((0,)) == pytest.approx(-1.0, rel=1e-9)
    assert eigen_residual(field, 0.0, pair.lam, pair.phi) <= 1e-10


def test_rotation_gives_conjugate_pair():
    pairs = linear_eigenpairs(builtin("rotation_decay"), 0.0)
    assert len(pairs) == 2
    lam = math.exp(-1) * cmath.exp(2j)
    assert _same_set([p.lam for p in pairs], [lam, lam.conjugate()], 1e-9)
    for p in pairs:
        assert eigen_residual(builtin("rotation_decay"), 0.0, p.lam, p.phi) <= 1e-8


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic", "nonnormal_jordan"])
def test_analytic_residuals(name):
    field = builtin(name)
    for t in (0.0, 0.7):
        for p in linear_eigenpairs(field, t):
            assert eigen_residual(field, t, p.lam, p.phi) <= 1e-8


def test_wrong_eigenvalue_has_large_residual():
    field = builtin("scalar_periodic")
    (pair,) = linear_eigenpairs(field, 0.0)
    law = entrance_law(field, 0.0)
    norm = math.sqrt(mean_functional(law, pair.phi * pair.phi))
    assert eigen_residual(field, 0.0, pair.lam + 0.1, pair.phi) >= 0.09 * norm


def test_residual_needs_polynomial():
    with pytest.raises(UsageError):
        eigen_residual(builtin("scalar_periodic"), 0.0, 0.5, np.cos)


def test_galerkin_spectrum_of_stationary_ou():
    rep = galerkin_spectrum(autonomous(a=-1.0, b=SQRT2, period=1.0), 0.0, degree=3)
    np.testing.assert_allclose(sorted(rep.galerkin_eigs.real, reverse=True),
                               [math.exp(-k) for k in range(4)], atol=1e-6)
    assert all(rep.checks().values())


@pytest.mark.parametrize("name", ["scalar_periodic", "coupled_periodic", "rotation_decay",
                                  "nonnormal_jordan"])
def test_galerkin_structure(name):
    field = builtin(name)
    rep = galerkin_spectrum(field, 0.4, degree=3)
    checks = rep.checks()
    assert all(checks.values()), checks
    r0 = get_propagator(field).floquet().r0
    assert rep.r0 == pytest.approx(r0)
    for p in rep.analytic_pairs:
        assert min(abs(e - p.lam) for e in rep.galerkin_eigs) <= 1e-6


def test_galerkin_eigenfunction_roundtrip():
    field = builtin("coupled_periodic")
    rep = galerkin_spectrum(field, 0.0, degree=2)
    idx = int(np.argsort(-np.abs(rep.galerkin_eigs))[1])
    phi = rep.eigenfunction(idx)
    assert eigen_residual(field, 0.0, rep.galerkin_eigs[idx], phi) <= 1e-8


def test_degree_limit():
    with pytest.raises(DomainError):
        galerkin_spectrum(builtin("scalar_periodic"), 0.0, degree=MAX_GALERKIN_DEGREE + 1)
    with pytest.raises(UsageError):
        galerkin_spectrum(builtin("scalar_periodic"), 0.0, degree=-1)


def test_semisimplicity_examples():
    assert semisimplicity(np.diag([0.5, 0.5]), 0.5)
    assert not semisimplicity(np.array([[0.5, 1.0], [0.0, 0.5]]), 0.5)
    fl = get_propagator(builtin("nonnormal_jordan")).floquet()
    assert not fl.top_semisimple


def test_jordan_generalized_eigenspace():
    field = builtin("nonnormal_jordan")
    rep = galerkin_spectrum(field, 0.0, degree=1)
    lam = math.exp(-1)
    assert rep.generalized_eigenspace(lam, power=1, tol=1e-6).shape[1] == 1
    assert rep.generalized_eigenspace(lam, power=2, tol=1e-6).shape[1] == 2
    (pair,) = linear_eigenpairs(field, 0.0)
    gen = linear_generalized_pair(field, 0.0, pair)
    k = transition_kernel(field, -1.0, 0.0)
    lhs = apply_kernel(k, gen.psi)
    assert lhs.max_abs_diff(gen.psi * lam - pair.phi) <= 1e-9


def test_semisimple_eigenvalue_has_no_generalized_pair():
    field = builtin("rotation_decay")
    pair = linear_eigenpairs(field, 0.0)[0]
    with pytest.raises(DomainError):
        linear_generalized_pair(field, 0.0, pair)


def test_lattice_scalar_period_two_pi():
    pts = gsharp_lattice(builtin("scalar_periodic"), 2.0)
    assert _same_set([p.value for p in pts],
                     [0, 1j, -1j, 2j, -2j, -1, -1 + 1j, -1 - 1j, -1 + 2j, -1 - 2j])


def test_lattice_rotation():
    pts = gsharp_lattice(builtin("rotation_decay"), 5.0)
    tp = 2 * math.pi
    assert _same_set([p.value for p in pts],
                     [0, -1 + 2j, -1 - 2j, -1 + (2 - tp) * 1j, -1 + (tp - 2) * 1j])
    assert all(p.semisimple for p in pts)


def test_lattice_flags_jordan():
    pts = gsharp_lattice(builtin("nonnormal_jordan"), 1.0)
    assert any(p.kind == "floquet" and not p.semisimple for p in pts)


def test_lattice_needs_periodic_field():
    with pytest.raises(UsageError):
        gsharp_lattice(builtin("scalar_aperiodic"), 1.0)


def test_autonomous_spectrum_examples():
    spec = autonomous_spectrum([[-1.0]], 2 * math.pi, 2, 1)
    assert _same_set(spec.points, [n * -1 + k * 1j for n in range(3) for k in (-1, 0, 1)])
    assert spec.real_parts == (0.0, -1.0, -2.0)
    spec2 = autonomous_spectrum(np.diag([-1.0, -3.0]), 1.0, 2, 0)
    assert spec2.real_parts == (0.0, -1.0, -2.0, -3.0, -4.0, -6.0)


def test_mean_functional_commutes_with_period_map():
    field = builtin("coupled_periodic")
    k = transition_kernel(field, -2.0, 0.0)
    law = entrance_law(field, 0.0)
    a, b = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
    for phi in (a * b * b + 1, a * a * a * a - b):
        assert mean_functional(law, apply_kernel(k, phi)) == pytest.approx(
            mean_functional(law, phi), abs=1e-8)
