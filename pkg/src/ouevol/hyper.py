"""Logarithmic Sobolev inequality, exponent path ``p(s,t)`` and hypercontractivity.

``kappa(r) = ||Q^{1/2}(r,-inf) B^{T,-1}(r)||^2`` (spectral norm) drives
everything: the log-Sobolev constant is ``p/(p-1) kappa`` and the exponent
solves ``p'(s) = -(p - 1) / kappa(s)`` backward from ``p(t) = q``, i.e.

    p(s, t) = 1 + (q - 1) exp(int_s^t dr / kappa(r)).

Integrals against ``nu_t`` use tensor Gauss-Hermite quadrature; the
``d/dt rho`` terms use the closed-form log-derivative of the entrance density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .coefficients import UsageError, eval_field
from .io import write_csv
from .kernel import apply_kernel, generator_values, lp_norm, quadrature_points
from .measures import density_time_logderivative, entrance_law, entrance_path, transition_kernel
from .observables import ExpSum, Polynomial, gradient
from .propagator import get_propagator

__all__ = [
    "kappa",
    "kappa_path",
    "log_sobolev_constant",
    "LogSobolevResult",
    "verify_log_sobolev",
    "QuadraticForm",
    "quadratic_form_terms",
    "verify_quadratic_form",
    "HyperPlan",
    "exponent_path",
    "HyperMargins",
    "verify_hypercontractivity",
    "alpha_value",
    "alpha_derivative",
]

LOGSOB_ORDER = 100
ODE_STEP = 0.0025
GL_NODES = 8
PANEL = 0.25


def _kappa_from(field, r: float, cov: np.ndarray) -> float:
    _, B, _ = eval_field(field, r)
    Binv = np.linalg.inv(B)
    S = Binv @ cov @ Binv.T
    val = float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])
    if not val > 0:
        raise RuntimeError(f"kappa({r}) = {val} is not positive")
    return val


def kappa(field, r: float) -> float:
    """``||Q^{1/2}(r,-inf) B^{T,-1}(r)||^2``, computed as ``lambda_max(B^{-1} Q B^{-T})``."""
    prop = get_propagator(field)
    return _kappa_from(prop.field, r, entrance_law(prop, r).cov)


def kappa_path(field, times) -> np.ndarray:
    """``kappa`` at arbitrary times, flowing one entrance law through their sorted union."""
    prop = get_propagator(field)
    times = np.asarray(times, dtype=float)
    uniq, inverse = np.unique(times, return_inverse=True)
    laws = entrance_path(prop, uniq) if len(uniq) > 1 else [entrance_law(prop, uniq[0])]
    vals = np.array([_kappa_from(prop.field, r, law.cov) for r, law in zip(uniq, laws)])
    return vals[inverse]


def log_sobolev_constant(field, t: float, p: float) -> float:
    """``c(p, t) = p / (p - 1) * kappa(t)``."""
    if not p > 1:
        raise UsageError(f"p must exceed 1, got {p}")
    return p / (p - 1) * kappa(field, t)


# -- log-Sobolev --------------------------------------------------------------

@dataclass
class LogSobolevResult:
    t: float
    p: float
    lhs: float
    norm_term: float
    dirichlet: float
    density_term: float
    constant: float
    converged: bool
    max_shift: float

    @property
    def rhs(self) -> float:
        return self.norm_term + self.constant * (self.dirichlet + self.density_term)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _phi_p(vals: np.ndarray, p: float) -> np.ndarray:
    """``|phi|^{p-2} phi``, set to 0 where ``|phi| < 1e-300``."""
    mod = np.abs(vals)
    out = np.zeros_like(vals)
    nz = mod >= 1e-300
    out[nz] = mod[nz] ** (p - 2) * vals[nz]
    return out


def _logsob_integrals(prop, t, law, phi, p, order):
    X, W = quadrature_points(law, order)
    vals = np.asarray(phi(X))
    mod = np.abs(vals)
    with np.errstate(divide="ignore"):
        logmod = np.where(mod > 0, np.log(np.where(mod > 0, mod, 1.0)), 0.0)
    modp = mod ** p
    Lphi = generator_values(prop.field, t, phi, X)
    dlog = density_time_logderivative(prop, t, X, law=law)
    return np.array([
        float(modp @ W),
        float((modp * logmod) @ W),
        float(np.real((-Lphi * np.conj(_phi_p(vals, p))) @ W)),
        float((modp * dlog) @ W) / p,
    ])


def verify_log_sobolev(field, t: float, p: float, phi, quad_order: int = LOGSOB_ORDER,
                       shift_tol: float = 1e-7) -> LogSobolevResult:
    """Both sides of the nonautonomous log-Sobolev inequality at time ``t``.

    ``lhs = int |phi|^p log|phi| d nu_t`` and
    ``rhs = ||phi||_p^p log ||phi||_p + c(p,t) (Re<-L phi, phi_p> + (1/p) int |phi|^p d_t rho)``.
    The quadrature is repeated at twice the order; ``converged`` records
    whether every integral moved by at most ``shift_tol``.
    """
    if not 1 < p <= 6:
        raise UsageError(f"p must lie in (1, 6], got {p}")
    prop = get_propagator(field)
    law = entrance_law(prop, t)
    base = _logsob_integrals(prop, t, law, phi, p, quad_order)
    fine = _logsob_integrals(prop, t, law, phi, p, 2 * quad_order)
    shift = float(np.max(np.abs(fine - base)))
    N, ent, dirichlet, dens = base
    if N == 0:
        raise UsageError("phi vanishes identically")
    norm_term = N * math.log(N) / p
    return LogSobolevResult(float(t), float(p), ent, norm_term, dirichlet, dens,
                            log_sobolev_constant(prop, t, p), shift <= shift_tol, shift)


# -- quadratic form -------------------------------------------------------------

@dataclass
class QuadraticForm:
    """``energy = int phi L phi``, ``dirichlet = 1/2 int |B^T D phi|^2``, ``density = 1/2 int phi^2 d_t rho``."""

    energy: float
    dirichlet: float
    density: float

    @property
    def residual(self) -> float:
        return self.energy + self.dirichlet - self.density


def quadratic_form_terms(field, t: float, phi, quad_order: int = LOGSOB_ORDER) -> QuadraticForm:
    prop = get_propagator(field)
    law = entrance_law(prop, t)
    _, B, _ = eval_field(prop.field, t)
    X, W = quadrature_points(law, quad_order)
    vals = np.real(np.asarray(phi(X)))
    Lphi = np.real(generator_values(prop.field, t, phi, X))
    grad = np.real(gradient(phi, X))
    dlog = density_time_logderivative(prop, t, X, law=law)
    return QuadraticForm(float((vals * Lphi) @ W),
                         0.5 * float(np.sum((grad @ B) ** 2, axis=1) @ W),
                         0.5 * float((vals ** 2 * dlog) @ W))


def verify_quadratic_form(field, t: float, phi, quad_order: int = LOGSOB_ORDER) -> float:
    """``|int phi L phi + 1/2 int |B^T D phi|^2 - 1/2 int phi^2 d_t rho|``.

    The identity follows from ``d/dt int phi^2 d nu_t = int L(t)(phi^2) d nu_t``
    and ``L(phi^2) = 2 phi L phi + |B^T D phi|^2``.
    """
    return abs(quadratic_form_terms(field, t, phi, quad_order).residual)


# -- exponent path ----------------------------------------------------------------

@dataclass
class HyperPlan:
    field: object
    t: float
    q: float
    s_grid: np.ndarray
    p_closed: np.ndarray
    p_ode: np.ndarray
    lower_bound: np.ndarray
    c0: float
    kappa_grid: np.ndarray = dc_field(repr=False)

    @property
    def max_rel_diff(self) -> float:
        return float(np.max(np.abs(self.p_ode - self.p_closed) / self.p_closed))

    @property
    def lower_bound_ok(self) -> bool:
        return bool(np.all(self.p_closed >= self.lower_bound * (1 - 1e-12)))

    def kappa(self, r: float) -> float:
        return kappa(self.field, r)

    def p(self, s: float) -> float:
        """Closed-form exponent at any ``s <= t``."""
        return _p_closed(self.field, s, self.t, self.q)

    def dp(self, s: float) -> float:
        return -(self.p(s) - 1) / self.kappa(s)

    def path(self, s: float):
        return self.p(s), self.dp(s)

    def c(self, p: float, s: float) -> float:
        return p / (p - 1) * self.kappa(s)

    def rows(self):
        return [(s, pc, po, lb) for s, pc, po, lb in
                zip(self.s_grid, self.p_closed, self.p_ode, self.lower_bound)]

    def to_csv(self, path):
        return write_csv(path, ["s", "p_closed", "p_ode", "lower_bound"], self.rows())


def _gl_integral_inv_kappa(field, a: float, b: float) -> float:
    """``int_a^b dr / kappa(r)`` by composite Gauss-Legendre."""
    if b <= a:
        return 0.0
    panels = max(1, int(math.ceil((b - a) / PANEL - 1e-9)))
    x, w = leggauss(GL_NODES)
    edges = np.linspace(a, b, panels + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return float(weights @ (1.0 / kappa_path(field, nodes)))


def _p_closed(field, s: float, t: float, q: float) -> float:
    if s > t:
        raise UsageError("need s <= t")
    return 1.0 + (q - 1.0) * math.exp(_gl_integral_inv_kappa(field, s, t))


def _p_ode(field, t: float, q: float, s_sorted_desc: np.ndarray) -> np.ndarray:
    """RK4 for ``dp/dsigma = (p - 1)/kappa(t - sigma)``, ``sigma = t - s``, hitting each grid point."""
    targets = t - s_sorted_desc
    stops = [0.0]
    for tau in targets:
        if tau > stops[-1]:
            n = max(1, int(math.ceil((tau - stops[-1]) / ODE_STEP - 1e-9)))
            stops.extend(np.linspace(stops[-1], tau, n + 1)[1:])
    stops = np.asarray(stops)
    stage_sigmas = np.concatenate([stops, 0.5 * (stops[1:] + stops[:-1])])
    kap = dict(zip(stage_sigmas, kappa_path(field, t - stage_sigmas)))
    y = q - 1.0
    values = {0.0: q}
    for a, b in zip(stops[:-1], stops[1:]):
        h = b - a
        m = 0.5 * (a + b)
        k1 = y / kap[a]
        k2 = (y + 0.5 * h * k1) / kap[m]
        k3 = (y + 0.5 * h * k2) / kap[m]
        k4 = (y + h * k3) / kap[b]
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        values[b] = 1.0 + y
    return np.array([values[tau] if tau > 0 else q for tau in targets])


def exponent_path(field, t: float, q: float, s_grid: Sequence[float],
                  c0: Optional[float] = None) -> HyperPlan:
    """Closed-form and ODE exponents on ``s_grid`` plus the ``c0`` lower bound."""
    if not q > 1:
        raise UsageError(f"q must exceed 1, got {q}")
    prop = get_propagator(field)
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size == 0 or np.any(s_grid > t):
        raise UsageError("s_grid must be non-empty and lie in (-inf, t]")
    if c0 is None:
        from .asymptotics import compute_c0
        c0 = compute_c0(prop).c0
    p_closed = np.array([_p_closed(prop, s, t, q) for s in s_grid])
    order = np.argsort(-s_grid)
    p_ode = np.empty_like(p_closed)
    p_ode[order] = _p_ode(prop, t, q, s_grid[order])
    lower = 1.0 + (q - 1.0) * np.exp(2.0 * c0 * (s_grid - t))
    return HyperPlan(prop, float(t), float(q), s_grid, p_closed, p_ode, lower, float(c0),
                     kappa_path(prop, s_grid))


# -- hypercontractivity -------------------------------------------------------------

@dataclass
class HyperMargins:
    """Rows ``(s, p, observable index, lhs, rhs, margin, route)``."""

    rows: list

    def min_margin(self, route: str) -> float:
        return min((r[5] for r in self.rows if r[6] == route), default=math.inf)

    @property
    def passed(self) -> bool:
        return self.min_margin("closed_form") >= -1e-9 and self.min_margin("quadrature") >= -1e-5

    def to_csv(self, path):
        return write_csv(path, ["s", "p", "observable", "lhs", "rhs", "margin", "route"],
                         self.rows)


def _route(phi) -> str:
    return "closed_form" if isinstance(phi, ExpSum) and phi.is_single else "quadrature"


def verify_hypercontractivity(field, t: float, q: float, s_grid, phis,
                              plan: Optional[HyperPlan] = None) -> HyperMargins:
    """``margin = ||phi||_{L^q(nu_t)} - ||P_{s,t} phi||_{L^{p(s,t)}(nu_s)}``."""
    prop = get_propagator(field)
    plan = plan or exponent_path(prop, t, q, s_grid)
    law_t = entrance_law(prop, t)
    rows = []
    for i, phi in enumerate(phis):
        rhs = lp_norm(law_t, phi, q)
        for s, p in zip(plan.s_grid, plan.p_closed):
            image = apply_kernel(transition_kernel(prop, s, t), phi)
            lhs = lp_norm(entrance_law(prop, s), image, p)
            rows.append((float(s), float(p), i, lhs, rhs, rhs - lhs, _route(phi)))
    return HyperMargins(rows)


# -- alpha(s) ---------------------------------------------------------------------

def alpha_value(field, t: float, s: float, phi, p: float) -> float:
    """``alpha(s) = ||P_{s,t} phi||_{L^p(nu_s)}``."""
    prop = get_propagator(field)
    image = apply_kernel(transition_kernel(prop, s, t), phi)
    return lp_norm(entrance_law(prop, s), image, p)


def alpha_derivative(field, t: float, q: float, s: float, phi,
                     p_path: Optional[Callable[[float], tuple]] = None,
                     h: float = 1e-4, quad_order: int = LOGSOB_ORDER):
    """``(analytic, finite_difference)`` for ``d/ds ||P_{s,t} phi||_{L^{p(s)}(nu_s)}``.

    ``p_path(s)`` returns ``(p, dp/ds)``; by default the hypercontractive
    exponent ``p(s,t)`` with ``dp/ds = -(p - 1)/kappa(s)``.  The analytic value is

        alpha^{1-p} [Re<d_s u, u_p> + (1/p) int |u|^p d_s rho
                     + (p'/p) (int |u|^p log|u| d nu_s - alpha^p log alpha)]

    with ``u = P_{s,t} phi`` and ``d_s u = -L(s) u``.
    """
    if not isinstance(phi, (Polynomial, ExpSum)):
        raise UsageError("alpha_derivative needs a closed-form observable")
    prop = get_propagator(field)
    if p_path is None:
        plan = HyperPlan(prop, float(t), float(q), np.array([]), np.array([]), np.array([]),
                         np.array([]), float("nan"), np.array([]))
        p_path = plan.path
    p, dp = p_path(s)
    law = entrance_law(prop, s)
    u = apply_kernel(transition_kernel(prop, s, t), phi)
    X, W = quadrature_points(law, quad_order)
    vals = np.asarray(u(X))
    mod = np.abs(vals)
    modp = mod ** p
    alpha_p = float(modp @ W)
    if alpha_p == 0:
        raise UsageError("alpha(s) vanishes")
    alpha = alpha_p ** (1.0 / p)
    ds_u = -generator_values(prop.field, s, u, X)
    inner = float(np.real((ds_u * np.conj(_phi_p(vals, p))) @ W))
    dens = float((modp * density_time_logderivative(prop, s, X, law=law)) @ W) / p
    with np.errstate(divide="ignore"):
        logmod = np.where(mod > 0, np.log(np.where(mod > 0, mod, 1.0)), 0.0)
    entropy = float((modp * logmod) @ W) - alpha_p * math.log(alpha)
    analytic = alpha ** (1 - p) * (inner + dens + dp / p * entropy)
    p_plus, _ = p_path(s + h)
    p_minus, _ = p_path(s - h)
    fd = (alpha_value(prop, t, s + h, phi, p_plus) - alpha_value(prop, t, s - h, phi, p_minus)) / (2 * h)
    return analytic, fd
