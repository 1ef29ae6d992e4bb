"""Action of ``P_{s,t}`` and ``L(t)`` on observables, and norms under Gaussian laws.

Polynomials and exponential sums are handled in closed form.  Everything
else goes through tensor Gauss-Hermite quadrature in whitened coordinates
``y = mean + S^{1/2} z`` (symmetric square root).
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate
from scipy.special import logsumexp

from .coefficients import UsageError, eval_field
from .measures import EntranceLaw, GaussianMeasure, TransitionKernel
from .observables import ExpSum, Generic, Polynomial, gradient, hessian

__all__ = [
    "apply_kernel",
    "kernel_expectation",
    "gaussian_expectation",
    "mean_functional",
    "apply_generator",
    "generator_values",
    "lp_norm",
    "log_lp_norm",
    "l2_inner",
    "gh_rule",
    "quadrature_points",
    "DEFAULT_QUAD_ORDER",
]

DEFAULT_QUAD_ORDER = 40
MAX_GENERIC_DIM = 3


@lru_cache(maxsize=64)
def gh_rule(n: int, order: int):
    """Tensor probabilists' Gauss-Hermite rule for ``N(0, I_n)``; weights sum to 1."""
    if order < 1:
        raise UsageError("quad_order must be >= 1")
    z, w = hermegauss(order)
    w = w / w.sum()
    grids = np.meshgrid(*([z] * n), indexing="ij")
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    Z.setflags(write=False)
    W.setflags(write=False)
    return Z, W


def _measure(m) -> GaussianMeasure:
    if isinstance(m, EntranceLaw):
        return m.law
    if isinstance(m, GaussianMeasure):
        return m
    raise UsageError(f"expected a Gaussian measure, got {type(m)}")


def quadrature_points(m, quad_order: int = DEFAULT_QUAD_ORDER):
    """Nodes ``X`` and weights ``W`` integrating against the measure ``m``."""
    m = _measure(m)
    if m.dim > MAX_GENERIC_DIM:
        raise UsageError(f"quadrature supports n <= {MAX_GENERIC_DIM}")
    Z, W = gh_rule(m.dim, int(quad_order))
    return m.mean + Z @ m.sqrt_cov.T, W


def apply_kernel(kern: TransitionKernel, phi):
    """``P_{s,t} phi`` as an observable of the same closed-form kind."""
    U, g, Q = kern.U, kern.g, kern.Q
    if isinstance(phi, Polynomial):
        return phi.gaussian_smooth(Q).compose_affine(U, g)
    if isinstance(phi, ExpSum):
        w = phi.freqs
        scale = np.exp(w @ g + 0.5 * np.einsum("ki,ij,kj->k", w, Q, w))
        return ExpSum(phi.coefs * scale, w @ U)
    raise UsageError("apply_kernel needs a polynomial or exponential observable; "
                     "use kernel_expectation for generic functions")


def gaussian_expectation(m, phi, quad_order: int = DEFAULT_QUAD_ORDER):
    """``E[phi]`` under a Gaussian measure: exact for closed forms, quadrature otherwise."""
    m = _measure(m)
    if isinstance(phi, Polynomial):
        return phi.expectation(m.mean, m.cov)
    if isinstance(phi, ExpSum):
        return phi.expectation(m.mean, m.cov)
    if isinstance(phi, Generic) or callable(phi):
        X, W = quadrature_points(m, quad_order)
        return np.asarray(phi(X)) @ W
    raise UsageError(f"unsupported observable {type(phi)}")


def kernel_expectation(kern: TransitionKernel, phi, x, quad_order: int = DEFAULT_QUAD_ORDER):
    """``P_{s,t} phi (x)``."""
    if quad_order < 1:
        raise UsageError("quad_order must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(phi, (Polynomial, ExpSum)):
        return apply_kernel(kern, phi)(x)
    if np.linalg.eigvalsh(kern.Q).min() <= 0:
        raise UsageError("generic observables need a nondegenerate transition covariance")
    return gaussian_expectation(kern.law(x), phi, quad_order)


def mean_functional(law, phi, quad_order: int = DEFAULT_QUAD_ORDER):
    """``M_t phi``: the mean of ``phi`` under ``nu_t``."""
    return gaussian_expectation(law, phi, quad_order)


def generator_values(field, t: float, phi, X) -> np.ndarray:
    """``L(t) phi`` at points ``X`` of shape ``(m, n)``."""
    A, B, f = eval_field(field, t)
    X = np.asarray(X, dtype=float).reshape(-1, A.shape[0])
    D = B @ B.T
    grad = gradient(phi, X)
    hess = hessian(phi, X)
    drift = X @ A.T + f
    return 0.5 * np.einsum("ij,mji->m", D, hess) + np.einsum("mi,mi->m", drift, grad)


def apply_generator(field, t: float, phi, x):
    """``L(t) phi (x)`` at a single point."""
    return generator_values(field, t, phi, np.atleast_1d(np.asarray(x, float))[None, :])[0]


def l2_inner(m, phi, psi, quad_order: int = DEFAULT_QUAD_ORDER):
    """``<phi, psi>`` in ``L^2(m)`` (conjugate-linear in ``psi``)."""
    m = _measure(m)
    if isinstance(phi, Polynomial) and isinstance(psi, Polynomial):
        return (phi * psi.conj()).expectation(m.mean, m.cov)
    if isinstance(phi, ExpSum) and isinstance(psi, ExpSum):
        return (phi * psi.conj()).expectation(m.mean, m.cov)
    X, W = quadrature_points(m, quad_order)
    return (np.asarray(phi(X)) * np.conj(np.asarray(psi(X)))) @ W


def lp_norm(m, phi, p: float, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """``(int |phi|^p dm)^{1/p}``; see :func:`log_lp_norm` for the routes."""
    return math.exp(log_lp_norm(m, phi, p, quad_order))


def log_lp_norm(m, phi, p: float, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """``log ||phi||_{L^p(m)}``, evaluated in log space so large ``p`` cannot overflow.

    Closed forms: single exponentials (Gaussian mgf), any polynomial or
    exponential sum at ``p = 2`` and real polynomials at even integer ``p``.
    Real polynomials in one variable are integrated adaptively between their
    real roots; everything else uses Gauss-Hermite quadrature.
    """
    if not p >= 1:
        raise UsageError(f"p must be >= 1, got {p}")
    m = _measure(m)
    if isinstance(phi, ExpSum) and phi.is_single:
        c = abs(phi.coefs[0])
        if c == 0:
            return -math.inf
        k = phi.freqs[0].real
        return float(math.log(c) + k @ m.mean + 0.5 * p * k @ m.cov @ k)
    if isinstance(phi, (Polynomial, ExpSum)) and p == 2:
        val = float(np.real((phi * phi.conj()).expectation(m.mean, m.cov)))
        return 0.5 * math.log(val) if val > 0 else -math.inf
    if (isinstance(phi, Polynomial) and phi.is_real and float(p).is_integer()
            and int(p) % 2 == 0 and p <= 16):
        val = float((phi.real ** int(p)).expectation(m.mean, m.cov))
        return math.log(val) / p if val > 0 else -math.inf
    if isinstance(phi, Polynomial) and phi.is_real and m.dim == 1:
        return _log_lp_norm_1d_poly(m, phi.real, p)
    X, W = quadrature_points(m, quad_order)
    mod = np.abs(np.asarray(phi(X)))
    nz = (mod > 0) & (W > 0)
    if not nz.any():
        return -math.inf
    return float(logsumexp(p * np.log(mod[nz]) + np.log(W[nz]))) / p


def _log_lp_norm_1d_poly(m: GaussianMeasure, phi: Polynomial, p: float) -> float:
    # |phi|^p has kinks at real roots and, for large p, a peak far in the tail;
    # integrate exp(g - max g) adaptively between roots over the region that matters
    mu, sd = float(m.mean[0]), math.sqrt(float(m.cov[0, 0]))
    if sd == 0:
        val = abs(float(phi(np.array([mu]))))
        return math.log(val) if val > 0 else -math.inf
    deg = phi.degree
    coeffs = [phi.coefficient((k,)) for k in range(deg, -1, -1)]
    roots = np.roots(coeffs) if deg > 0 else np.array([])
    breaks = sorted({(r.real - mu) / sd for r in roots if abs(r.imag) < 1e-12})
    reach = math.sqrt(2.0 * p * deg) + 40.0 + max((abs(b) for b in breaks), default=0.0)

    def g(z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return p * np.log(np.abs(phi((mu + sd * z)[:, None]))) - 0.5 * z * z

    grid = np.linspace(-reach, reach, 20001)
    gv = g(grid)
    gmax = float(gv.max())
    if not np.isfinite(gmax):
        return -math.inf
    keep = np.nonzero(gv > gmax - 750.0)[0]
    lo = grid[max(keep[0] - 1, 0)]
    hi = grid[min(keep[-1] + 1, len(grid) - 1)]
    edges = [lo] + [b for b in breaks if lo < b < hi] + [hi]
    peak = float(grid[int(np.argmax(gv))])

    def integrand(z):
        return math.exp(float(g(np.array([z]))[0]) - gmax)

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        pts = [peak] if a < peak < b else None
        total += integrate.quad(integrand, a, b, points=pts, epsabs=0.0,
                                epsrel=1e-12, limit=400)[0]
    return (gmax + math.log(total) - 0.5 * math.log(2 * math.pi)) / p
