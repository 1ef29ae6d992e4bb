"""Gaussian transition laws and the distinguished entrance law ``nu_t``.

``nu_t = N(g(t,-inf), Q(t,-inf))`` is built in two independent ways:

* periodic fields: discrete Stein fixed point ``Q = M Q M^T + Q(t, t-T)``
  summed as a series, and ``g = (I - M)^{-1} g(t, t-T)``;
* any field: integrate from ``t - L`` with ``L`` large enough that the
  forgotten initial condition is below tolerance.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .coefficients import DomainError, UsageError, eval_field
from .propagator import Propagator, compose, get_propagator

__all__ = [
    "GaussianMeasure",
    "TransitionKernel",
    "EntranceLaw",
    "NoEntranceLaw",
    "transition_kernel",
    "entrance_law",
    "entrance_path",
    "log_density",
    "density_time_logderivative",
    "apriori_bounds",
    "kernel_by_quadrature",
    "set_default_entrance_tol",
]

PSD_CLIP = 1e-12
_DEFAULT_TOL = [1e-13]


def set_default_entrance_tol(tol: float) -> float:
    """Set the tolerance used by :func:`entrance_law` when none is given; returns the old value."""
    if not tol > 0:
        raise UsageError("entrance tolerance must be positive")
    old = _DEFAULT_TOL[0]
    _DEFAULT_TOL[0] = float(tol)
    return old


class NoEntranceLaw(DomainError):
    """The growth bound is not negative, so no bounded-moment entrance law exists."""


def _sym_check(cov: np.ndarray) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    scale = max(1.0, float(np.abs(cov).max()))
    if np.abs(cov - cov.T).max() > 1e-12 * scale:
        raise ValueError("covariance is not symmetric")
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = _sym_check(self.cov)
        if cov.shape != (len(mean), len(mean)):
            raise ValueError("mean/cov shape mismatch")
        w, V = np.linalg.eigh(cov)
        if w.min() < -PSD_CLIP * max(1.0, abs(w.max())):
            raise ValueError(f"covariance has negative eigenvalue {w.min():.3e}")
        if w.min() < 0:
            cov = (V * np.maximum(w, 0.0)) @ V.T
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)

    @cached_property
    def sqrt_cov(self) -> np.ndarray:
        """Symmetric square root of the covariance."""
        w, V = np.linalg.eigh(self.cov)
        return (V * np.sqrt(np.maximum(w, 0.0))) @ V.T

    @cached_property
    def _chol(self):
        try:
            return np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise DomainError("covariance is singular") from None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.dim))
        return self.mean + z @ self.sqrt_cov.T


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Gaussian law of ``X_t`` given ``X_s = x``: ``N(U x + g, Q)``."""

    s: float
    t: float
    U: np.ndarray
    g: np.ndarray
    Q: np.ndarray

    def law(self, x) -> GaussianMeasure:
        return GaussianMeasure(self.U @ np.asarray(x, float) + self.g, self.Q)


@dataclass(frozen=True, eq=False)
class EntranceLaw:
    t: float
    law: GaussianMeasure
    construction: str
    truncation_error: float

    @property
    def mean(self) -> np.ndarray:
        return self.law.mean

    @property
    def cov(self) -> np.ndarray:
        return self.law.cov


def transition_kernel(field, s: float, t: float) -> TransitionKernel:
    """Jointly integrate ``U``, ``g`` and ``Q`` from ``(I, 0, 0)`` at time ``s``."""
    prop = get_propagator(field)
    U, g, Q = prop.kernel(s, t)
    return TransitionKernel(float(s), float(t), U, g, Q)


def kernel_by_quadrature(field, s: float, t: float, nodes: int = 16,
                         panel: float = 0.25) -> TransitionKernel:
    """``g`` and ``Q`` from their defining integrals by composite Gauss-Legendre.

    ``g = int_s^t U(t,r) f(r) dr`` and ``Q = int_s^t U(t,r) B B^T U(t,r)^T dr``
    with ``U(t,r)`` taken from the propagator at each node.  This is an
    independent check on the joint ODE sweep of :func:`transition_kernel`.
    """
    s, t = float(s), float(t)
    if s > t:
        raise UsageError(f"need s <= t, got s={s}, t={t}")
    prop = get_propagator(field)
    field = prop.field
    n = prop.n
    g = np.zeros(n)
    Q = np.zeros((n, n))
    if t > s:
        k = max(1, int(math.ceil((t - s) / panel)))
        x, w = np.polynomial.legendre.leggauss(nodes)
        edges = np.linspace(s, t, k + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            rs = 0.5 * (b - a) * x + 0.5 * (a + b)
            _, B, f = field.batch(rs)
            for r, wr, Br, fr in zip(rs, 0.5 * (b - a) * w, B, f):
                U = prop.propagate(r, t)
                g += wr * (U @ fr)
                UB = U @ Br
                Q += wr * (UB @ UB.T)
    return TransitionKernel(s, t, prop.propagate(s, t), g, 0.5 * (Q + Q.T))


def apriori_bounds(prop: Propagator):
    """``(cov_bound, mean_bound, omega)`` for the entrance law.

    ``||Q(t,-inf)|| <= C^2 M^2 / (2|omega|)`` and
    ``|g(t,-inf)| <= M sup|f| / |omega|`` with ``omega = omega0 / 2``.
    """
    cached = getattr(prop, "_apriori", None)
    if cached is not None:
        return cached
    w0 = prop.estimate_growth_bound()
    if w0 >= 0:
        raise NoEntranceLaw(f"growth bound {w0} is not negative")
    omega = 0.5 * w0
    M = prop.estimate_M(omega).value
    field = prop.field
    grid = (np.linspace(0, field.period, 257) if field.periodic
            else np.linspace(-50, 50, 2001))
    fmax = float(np.linalg.norm(field.batch(grid)[2], axis=1).max())
    out = (field.normC ** 2 * M ** 2 / (2 * abs(omega)), M * fmax / abs(omega), omega)
    prop._apriori = out
    return out


def _stein_series(M, R, tol, max_terms=100000):
    total = np.zeros_like(R)
    term = R.copy()
    for _ in range(max_terms):
        total += term
        if np.linalg.norm(term, 2) < tol:
            return 0.5 * (total + total.T), float(np.linalg.norm(term, 2))
        term = M @ term @ M.T
    raise RuntimeError("Stein series did not converge")


def _periodic_route(prop: Propagator, t: float, tol: float):
    T = prop.field.period
    M, g1, Q1 = prop.kernel(t - T, t)
    n = len(g1)
    scale = max(1.0, float(np.linalg.norm(Q1, 2)))
    Qinf, last = _stein_series(M, Q1, tol * scale)
    IM = np.eye(n) - M
    if np.linalg.cond(IM) > 1e12:
        raise RuntimeError("I - M is numerically singular")
    ginf = np.linalg.solve(IM, g1)
    rho = float(np.abs(np.linalg.eigvals(M)).max())
    # tail of the series after the last kept term
    return ginf, Qinf, last * rho / max(1e-300, 1 - rho) if rho < 1 else math.inf


def _truncation_route(prop: Propagator, t: float, tol: float):
    cov_bound, mean_bound, _ = apriori_bounds(prop)
    L = 10.0
    while True:
        U = prop.propagate(t - L, t)
        nu = float(np.linalg.norm(U, 2))
        err = max(nu ** 2 * cov_bound, nu * mean_bound)
        if err < tol or L > 1e4:
            break
        L *= 1.5
    U, g, Q = prop.kernel(t - L, t)
    return g, Q, err


def entrance_law(field, t: float, tol: Optional[float] = None, route: str = "auto") -> EntranceLaw:
    """The distinguished entrance law at time ``t``.

    ``route`` is ``"periodic_fixed_point"``, ``"truncation"`` or ``"auto"``
    (fixed point for periodic fields).  Results are memoised per propagator.
    """
    prop = get_propagator(field)
    tol = _DEFAULT_TOL[0] if tol is None else float(tol)
    t = float(t)
    if not math.isfinite(t):
        raise DomainError("t must be finite")
    if route == "auto":
        route = "periodic_fixed_point" if prop.field.periodic else "truncation"
    if route not in ("periodic_fixed_point", "truncation"):
        raise UsageError(f"unknown route {route!r}")
    key = (round(t, 12), route, tol)
    with prop._lock:
        hit = prop._law_cache.get(key)
    if hit is not None:
        return hit
    w0 = prop.estimate_growth_bound()
    if w0 >= 0:
        raise NoEntranceLaw(f"growth bound {w0} is not negative")
    if route == "periodic_fixed_point":
        if not prop.field.periodic:
            raise UsageError("fixed-point route needs a periodic field")
        g, Q, err = _periodic_route(prop, t, tol)
    else:
        g, Q, err = _truncation_route(prop, t, tol)
    law = EntranceLaw(t, GaussianMeasure(g, Q), route, err)
    if np.linalg.eigvalsh(law.cov).min() <= 0:
        raise RuntimeError("entrance-law covariance is not positive definite")
    with prop._lock:
        prop._law_cache[key] = law
    return law


def entrance_path(field, times) -> list:
    """Entrance laws along increasing ``times`` by flowing the first one forward."""
    prop = get_propagator(field)
    ts = np.asarray(times, dtype=float)
    first = entrance_law(prop, ts[0])
    laws = [first]
    state = (np.zeros((prop.n, prop.n)), first.mean, first.cov)
    for a, b in zip(ts[:-1], ts[1:]):
        state = compose(prop.kernel(a, b), state)
        laws.append(EntranceLaw(float(b), GaussianMeasure(state[1], state[2]),
                                first.construction, first.truncation_error))
    return laws


def log_density(m: GaussianMeasure, x) -> np.ndarray | float:
    """Gaussian log density; ``x`` may be a point or an ``(k, n)`` array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    X = x.reshape(-1, m.dim)
    L = m._chol
    z = np.linalg.solve(L, (X - m.mean).T)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    out = -0.5 * (m.dim * math.log(2 * math.pi) + logdet + (z * z).sum(axis=0))
    return float(out[0]) if single else out


def density_time_logderivative(field, t: float, x, law: EntranceLaw | None = None):
    """``d/dt log rho(x, t)`` for the entrance-law density, in closed form."""
    prop = get_propagator(field)
    law = law or entrance_law(prop, t)
    A, B, f = eval_field(prop.field, t)
    g, Q = law.mean, law.cov
    gdot = A @ g + f
    Qdot = A @ Q + Q @ A.T + B @ B.T
    try:
        Qi = np.linalg.inv(np.linalg.cholesky(Q))
    except np.linalg.LinAlgError:
        raise DomainError("entrance covariance is singular") from None
    Qinv = Qi.T @ Qi
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    Y = x.reshape(-1, len(g)) - g
    H = Qinv @ Qdot @ Qinv
    out = (-0.5 * np.trace(Qinv @ Qdot) + Y @ (Qinv @ gdot)
           + 0.5 * np.einsum("ki,ij,kj->k", Y, H, Y))
    return float(out[0]) if single else out
