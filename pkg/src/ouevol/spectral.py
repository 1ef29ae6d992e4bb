"""Spectral structure of the period map ``V(t) = P_{t-T,t}`` for periodic fields.

Two routes:

* analytic degree-1 eigenfunctions ``<c, x> + <c, g1> / (lam - 1)`` from the
  eigenvectors ``c`` of ``M^T`` (``M = U(t, t-T)``, ``g1 = g(t, t-T)``);
* a Galerkin matrix of ``V(t)`` on the orthonormal tensor Hermite basis of
  ``L^2(nu_t)`` in whitened coordinates ``z = Q^{-1/2} (x - g)``.

In whitened coordinates the period kernel is ``z -> W^{-1} M W z + noise`` with
no shift (the entrance mean is a fixed point), so the Galerkin matrix is
assembled exactly from the polynomial kernel action.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.polynomial import hermite_e

from .coefficients import DomainError, UsageError
from .kernel import apply_kernel
from .measures import TransitionKernel, entrance_law
from .polynomial import Polynomial, multi_indices
from .propagator import get_propagator, is_semisimple

__all__ = [
    "EigenPair",
    "GeneralizedPair",
    "SpectralReport",
    "LatticePoint",
    "AutonomousSpectrum",
    "linear_eigenpairs",
    "linear_generalized_pair",
    "eigen_residual",
    "galerkin_spectrum",
    "semisimplicity",
    "gsharp_lattice",
    "autonomous_spectrum",
    "MAX_GALERKIN_DEGREE",
]

MAX_GALERKIN_DEGREE = 8
CLUSTER_TOL = 1e-6

semisimplicity = is_semisimple


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: complex
    phi: Polynomial
    multiplier_vector: np.ndarray


@dataclass(frozen=True, eq=False)
class GeneralizedPair:
    """``V psi = lam psi - phi`` with ``V phi = lam phi``."""

    lam: complex
    phi: Polynomial
    psi: Polynomial


def _period_data(field, t: float):
    prop = get_propagator(field)
    if not prop.field.periodic:
        raise UsageError("spectral analysis needs a periodic field")
    T = prop.field.period
    M, g1, Q1 = prop.kernel(t - T, t)
    return prop, T, M, g1, Q1


def _clusters(eigs: np.ndarray, scale: float):
    """Group eigenvalues closer than ``CLUSTER_TOL * scale``; returns cluster means."""
    left = list(eigs)
    out = []
    while left:
        head = left.pop(0)
        group = [head] + [e for e in left if abs(e - head) <= CLUSTER_TOL * scale]
        left = [e for e in left if abs(e - head) > CLUSTER_TOL * scale]
        out.append((complex(np.mean(group)), len(group)))
    return out


def _canonical(v: np.ndarray) -> np.ndarray:
    """Unit vector with its largest entry real and positive."""
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    if np.all(np.abs(v.imag) <= 1e-15 * np.abs(v).max()):
        v = v.real
    return v


def _linear_form(c, g1, lam) -> Polynomial:
    const = complex(np.dot(c, g1)) / (lam - 1.0)
    if np.isrealobj(c) and abs(lam.imag) == 0:
        const = const.real
    return Polynomial.linear(c, const)


def linear_eigenpairs(field, t: float) -> list:
    """Degree-1 eigenfunctions of ``V(t)``, one per eigenvector of ``M^T``.

    Eigenvalues are taken as cluster means so that defective multipliers
    (computed only to ``sqrt(eps)`` individually) are still accurate.
    """
    _, _, M, g1, _ = _period_data(field, t)
    MT = M.T
    scale = max(float(np.linalg.norm(M, 2)), 1e-300)
    pairs = []
    for lam, _mult in _clusters(np.linalg.eigvals(MT), scale):
        if abs(lam.imag) <= 1e-14 * scale:
            lam = complex(lam.real, 0.0)
        N = lam * np.eye(len(MT)) - MT
        _, sv, Vh = np.linalg.svd(N)
        null = [Vh[i].conj() for i in range(len(sv)) if sv[i] <= CLUSTER_TOL * scale]
        if not null:
            null = [Vh[-1].conj()]
        for c in null:
            c = _canonical(c)
            pairs.append(EigenPair(lam, _linear_form(c, g1, lam), c))
    pairs.sort(key=lambda p: (-abs(p.lam), -p.lam.imag))
    return pairs


def linear_generalized_pair(field, t: float, pair: EigenPair) -> GeneralizedPair:
    """Degree-1 ``psi`` with ``V psi = lam psi - phi`` (exists iff ``lam`` is defective)."""
    _, _, M, g1, _ = _period_data(field, t)
    lam = pair.lam
    c = pair.multiplier_vector
    N = lam * np.eye(len(M)) - M.T
    c1, *_ = np.linalg.lstsq(N, c.astype(complex), rcond=None)
    if np.linalg.norm(N @ c1 - c) > 1e-6 * max(1.0, np.linalg.norm(c1)):
        raise DomainError(f"eigenvalue {lam} is semisimple: no generalized eigenvector")
    # remove the component along c so psi is canonical
    c1 = c1 - (np.vdot(c, c1) / np.vdot(c, c)) * c
    if np.all(np.abs(c1.imag) <= 1e-15 * np.abs(c1).max()) and lam.imag == 0:
        c1 = c1.real
    d = pair.phi.coefficient((0,) * len(c))
    const = (complex(np.dot(c1, g1)) + d) / (lam - 1.0)
    if np.isrealobj(c1) and lam.imag == 0:
        const = const.real
    return GeneralizedPair(lam, pair.phi, Polynomial.linear(c1, const))


def _period_kernel(field, t):
    _, T, M, g1, Q1 = _period_data(field, t)
    return TransitionKernel(t - T, t, M, g1, Q1)


def _l2_norm(law, p: Polynomial) -> float:
    val = (p * p.conj()).expectation(law.mean, law.cov)
    return math.sqrt(max(float(np.real(val)), 0.0))


def eigen_residual(field, t: float, lam: complex, phi: Polynomial) -> float:
    """``||V(t) phi - lam phi||`` in ``L^2(nu_t)``, exact for polynomials."""
    if not isinstance(phi, Polynomial):
        raise UsageError("eigen_residual needs a polynomial")
    law = entrance_law(field, t)
    image = apply_kernel(_period_kernel(field, t), phi)
    return _l2_norm(law, image - phi * lam)


# -- Galerkin route -----------------------------------------------------------

def _conversion(d: int):
    """``P2H`` (monomial -> He coefficients) and ``H2P`` as (d+1, d+1) matrices."""
    P2H = np.zeros((d + 1, d + 1))
    H2P = np.zeros((d + 1, d + 1))
    for j in range(d + 1):
        e = np.zeros(j + 1)
        e[j] = 1.0
        P2H[: j + 1, j] = hermite_e.poly2herme(e)
        H2P[: j + 1, j] = hermite_e.herme2poly(e)
    return P2H, H2P


def _to_dense(p: Polynomial, d: int) -> np.ndarray:
    out = np.zeros((d + 1,) * p.n, dtype=complex)
    for a, c in p.terms.items():
        if max(a) > d:
            raise RuntimeError("polynomial exceeds the Galerkin degree")
        out[a] += c
    return out


def _apply_axes(mat: np.ndarray, arr: np.ndarray) -> np.ndarray:
    for ax in range(arr.ndim):
        arr = np.moveaxis(np.tensordot(mat, arr, axes=([1], [ax])), 0, ax)
    return arr


def _hermite_basis(n: int, d: int):
    """Orthonormal ``h_a(z) = prod He_{a_i}(z_i) / sqrt(a_i!)`` as polynomials."""
    _, H2P = _conversion(d)
    basis = []
    for alpha in multi_indices(n, d):
        dense = np.ones(())
        for a in alpha:
            dense = np.multiply.outer(dense, H2P[:, a] / math.sqrt(math.factorial(a)))
        terms = {idx: float(dense[idx]) for idx in zip(*np.nonzero(dense))}
        basis.append(Polynomial(n, terms))
    return basis


@dataclass(eq=False)
class SpectralReport:
    t: float
    degree: int
    r0: float
    analytic_pairs: list
    residuals: list
    galerkin_eigs: np.ndarray
    eigvecs: np.ndarray = dc_field(repr=False)
    matrix: np.ndarray = dc_field(repr=False)
    basis: tuple = dc_field(repr=False)
    whitening: tuple = dc_field(repr=False)
    tol: float = 1e-6

    @property
    def unit_indices(self) -> list:
        return [i for i, e in enumerate(self.galerkin_eigs) if abs(e - 1) <= self.tol]

    @property
    def max_modulus(self) -> float:
        return float(np.abs(self.galerkin_eigs).max())

    @property
    def second_modulus(self) -> float:
        rest = [abs(e) for i, e in enumerate(self.galerkin_eigs) if i not in self.unit_indices]
        return float(max(rest, default=0.0))

    def degree_mass(self, index: int) -> np.ndarray:
        """Squared eigenvector weight per basis degree (normalised to sum 1)."""
        v = np.abs(self.eigvecs[:, index]) ** 2
        degs = np.array([sum(a) for a in self.basis])
        out = np.bincount(degs, weights=v, minlength=self.degree + 1)
        return out / out.sum()

    def eigenfunction(self, index: int = None, vector=None) -> Polynomial:
        """Galerkin eigenvector (or any coefficient vector) as a polynomial in ``x``."""
        v = self.eigvecs[:, index] if vector is None else np.asarray(vector)
        Winv, g = self.whitening
        n = len(g)
        z = Polynomial(n)
        for c, h in zip(v, _hermite_basis(n, self.degree)):
            if c != 0:
                z = z + h * complex(c)
        return z.compose_affine(Winv, -Winv @ g)

    def generalized_eigenspace(self, lam: complex, power: int = 2, tol: float = 1e-8) -> np.ndarray:
        """Columns spanning ``ker (G - lam)^power``."""
        N = np.linalg.matrix_power(self.matrix - lam * np.eye(len(self.matrix)), power)
        _, sv, Vh = np.linalg.svd(N)
        return Vh[sv <= tol * max(1.0, sv.max())].conj().T

    def checks(self) -> dict:
        units = self.unit_indices
        const_weight = (float(self.degree_mass(units[0])[0]) if len(units) == 1 else 0.0)
        return {
            "max_modulus_le_1": self.max_modulus <= 1 + 1e-8,
            "single_unit_eigenvalue": len(units) == 1,
            "unit_eigenvector_constant": const_weight >= 1 - self.tol,
            "nonunit_le_r0": self.second_modulus <= self.r0 + self.tol,
            "analytic_residuals_small": all(r <= 1e-8 for r in self.residuals),
        }

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "degree": self.degree,
            "r0": self.r0,
            "galerkin_eigs": [[float(e.real), float(e.imag)] for e in self.galerkin_eigs],
            "analytic_eigs": [[float(p.lam.real), float(p.lam.imag)] for p in self.analytic_pairs],
            "residuals": [float(r) for r in self.residuals],
            "checks": self.checks(),
        }


def galerkin_spectrum(field, t: float, degree: int = 3, tol: float = 1e-6) -> SpectralReport:
    """Matrix of ``V(t)`` on Hermite polynomials of total degree ``<= degree``."""
    degree = int(degree)
    if degree < 0:
        raise UsageError("degree must be >= 0")
    if degree > MAX_GALERKIN_DEGREE:
        raise DomainError(f"degree {degree} exceeds {MAX_GALERKIN_DEGREE}; "
                          "use a lower Galerkin degree")
    prop, T, M, g1, Q1 = _period_data(field, t)
    law = entrance_law(prop, t)
    w, V = np.linalg.eigh(law.cov)
    if w.min() <= 0:
        raise DomainError("entrance covariance is singular")
    W = (V * np.sqrt(w)) @ V.T
    Winv = (V / np.sqrt(w)) @ V.T
    Ut = Winv @ M @ W
    gt = Winv @ (M @ law.mean + g1 - law.mean)
    Qt = Winv @ Q1 @ Winv
    kern = TransitionKernel(t - T, t, Ut, gt, 0.5 * (Qt + Qt.T))

    n = prop.n
    alphas = multi_indices(n, degree)
    basis = _hermite_basis(n, degree)
    P2H, _ = _conversion(degree)
    norms = np.array([math.prod(math.sqrt(math.factorial(a)) for a in alpha)
                      for alpha in alphas])
    G = np.zeros((len(alphas), len(alphas)), dtype=complex)
    for j, h in enumerate(basis):
        image = apply_kernel(kern, h)
        coef = _apply_axes(P2H, _to_dense(image, degree))
        G[:, j] = [coef[a] for a in alphas] * norms
    if np.all(G.imag == 0):
        G = G.real
    eigs, vecs = np.linalg.eig(G)
    order = np.lexsort((-eigs.imag, -np.abs(eigs)))
    eigs, vecs = eigs[order], vecs[:, order]
    pairs = linear_eigenpairs(prop, t)
    residuals = [eigen_residual(prop, t, p.lam, p.phi) for p in pairs]
    fl = prop.floquet()
    return SpectralReport(float(t), degree, fl.r0, pairs, residuals, eigs, vecs, G,
                          alphas, (Winv, law.mean), tol)


# -- eigenvalue lattices --------------------------------------------------------

@dataclass(frozen=True)
class LatticePoint:
    value: complex
    kind: str  # "imaginary" (from constants) or "floquet"
    multiplier: complex
    semisimple: bool


def gsharp_lattice(field, im_cutoff: float) -> list:
    """Degree-1 eigenvalue lattice with ``|Im| <= im_cutoff``.

    Points ``2 pi i k / T`` (``e^{lam T} = 1``) and ``log(mu)/T + 2 pi i k / T`` for
    each distinct Floquet multiplier ``mu`` (principal logarithm), annotated
    with the semisimplicity of ``e^{lam T}``.
    """
    if not im_cutoff >= 0:
        raise UsageError("im_cutoff must be nonnegative")
    prop = get_propagator(field)
    if not prop.field.periodic:
        raise UsageError("lattice needs a periodic field")
    fl = prop.floquet()
    T = fl.period
    step = 2 * math.pi / T
    kmax = int(math.floor(im_cutoff / step + 1e-12)) + 1
    scale = max(float(np.linalg.norm(fl.monodromy, 2)), 1e-300)
    sources = [(0j, "imaginary", 1.0 + 0j, True)]
    for mu, _ in _clusters(fl.multipliers, scale):
        flag = is_semisimple(fl.monodromy, mu)
        sources.append((cmath.log(mu) / T, "floquet", mu, flag))
    out = []
    for base, kind, mu, flag in sources:
        for k in range(-kmax - 1, kmax + 2):
            lam = base + 1j * step * k
            if abs(lam.imag) <= im_cutoff + 1e-12:
                out.append(LatticePoint(complex(lam), kind, complex(mu), flag))
    out.sort(key=lambda p: (-round(p.value.real, 12), round(p.value.imag, 12)))
    return out


@dataclass(frozen=True)
class AutonomousSpectrum:
    points: tuple  # eigenvalues of G_# (periodic setting, period T)
    real_parts: tuple  # abscissas of the vertical lines making up sigma(G)


def autonomous_spectrum(A, T: float, n_cutoff: int, k_cutoff: int) -> AutonomousSpectrum:
    """``2 k pi i / T + sum_j n_j lam_j`` over ``sum n_j <= n_cutoff``, ``|k| <= k_cutoff``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    raw = np.linalg.eigvals(A)
    lams = []
    for e in raw:
        if all(abs(e - x) > 1e-9 * max(1.0, abs(x)) for x in lams):
            lams.append(complex(e))
    sums = set()
    for total in range(int(n_cutoff) + 1):
        for combo in _compositions(total, len(lams)):
            s = sum(nj * lj for nj, lj in zip(combo, lams))
            sums.add(complex(round(s.real, 12), round(s.imag, 12)))
    pts = set()
    for s in sums:
        for k in range(-int(k_cutoff), int(k_cutoff) + 1):
            lam = s + 2j * math.pi * k / T
            pts.add(complex(round(lam.real, 12), round(lam.imag, 12)))
    points = tuple(sorted(pts, key=lambda z: (-z.real, z.imag)))
    reals = tuple(sorted({round(s.real, 12) for s in sums}, reverse=True))
    return AutonomousSpectrum(points, reals)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest
