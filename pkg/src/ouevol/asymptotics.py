"""Exponential decay of ``P_{s,t}(phi - M_t phi)``, its sharpness, ``c0`` and Poincare.

All ``L^2`` norms of polynomial and exponential images are exact Gaussian
moments; ``Generic`` observables fall back to quadrature where allowed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .coefficients import UsageError
from .io import write_csv
from .kernel import apply_kernel, gaussian_expectation, l2_inner, mean_functional
from .measures import entrance_law, transition_kernel
from .observables import ExpSum, Generic, Polynomial, gradient
from .propagator import get_propagator
from .spectral import linear_eigenpairs, linear_generalized_pair

__all__ = [
    "DecayProfile",
    "DecayCurve",
    "Margins",
    "SharpnessReport",
    "decay_curve",
    "verify_sharpness",
    "refute_subrate",
    "default_omega_grid",
    "compute_c0",
    "verify_decay_bound",
    "verify_global_decay",
    "verify_poincare",
    "project_pi",
    "spacetime_decay",
    "l2_norm",
]


def l2_norm(m, phi) -> float:
    """``||phi||`` in ``L^2(m)``."""
    val = l2_inner(m, phi, phi)
    return math.sqrt(max(float(np.real(val)), 0.0))


def _check_closed_form(phi):
    if not isinstance(phi, (Polynomial, ExpSum)):
        raise UsageError("decay curves need polynomial or exponential observables")


def _std(law, psi) -> float:
    """Standard deviation of ``psi`` under ``law``.

    Constant terms are dropped first so that the result is accurate relative
    to the non-constant part even when that part is tiny.
    """
    if isinstance(psi, Polynomial):
        zero = (0,) * psi.n
        psi = Polynomial(psi.n, {a: c for a, c in psi.terms.items() if a != zero})
    return l2_norm(law, psi - mean_functional(law, psi))


def _image_norm(field, s: float, t: float, phi) -> float:
    """``||P_{s,t}(phi - M_t phi)||_{L^2(nu_s)}``.

    By invariance ``P_{s,t}(phi - M_t phi)`` has ``nu_s``-mean zero, so its norm
    is the ``nu_s`` standard deviation of ``P_{s,t} phi``; evaluating it that
    way avoids cancellation between large constants at long lags.
    """
    psi = apply_kernel(transition_kernel(field, s, t), phi)
    return _std(entrance_law(field, s), psi)


@dataclass
class DecayCurve:
    t: float
    observable: object
    lags: np.ndarray
    norms: np.ndarray
    fitted_rate: Optional[float]
    degenerate: bool = False

    def rows(self, bound=None):
        bound = np.full(len(self.lags), np.nan) if bound is None else np.asarray(bound)
        return [(lag, nrm, b, b - nrm) for lag, nrm, b in zip(self.lags, self.norms, bound)]

    def to_csv(self, path, bound=None):
        return write_csv(path, ["lag", "norm", "bound", "margin"], self.rows(bound))


def _fit_rate(lags: np.ndarray, norms: np.ndarray) -> Optional[float]:
    half = len(lags) // 2
    x, y = lags[half:], norms[half:]
    if len(x) < 2 or np.any(y <= 0):
        return None
    slope, _ = np.polyfit(x, np.log(y), 1)
    return float(slope)


def decay_curve(field, t: float, phi, lags: Sequence[float]) -> DecayCurve:
    """``||P_{t-lag,t}(phi - M_t phi)||_{L^2(nu_{t-lag})}`` over ``lags``.

    The rate is a least-squares fit of the log-norms over the second half of
    the lag grid.  Constant ``phi`` gives a zero curve flagged ``degenerate``.
    """
    prop = get_propagator(field)
    lags = np.asarray(lags, dtype=float)
    if lags.size == 0 or np.any(lags < 0):
        raise UsageError("lags must be a non-empty list of nonnegative numbers")
    _check_closed_form(phi)
    law = entrance_law(prop, t)
    if _std(law, phi) <= 1e-14 * max(l2_norm(law, phi), 1e-300):
        return DecayCurve(float(t), phi, lags, np.zeros(len(lags)), None, True)
    norms = np.array([_image_norm(prop, t - lag, t, phi) for lag in lags])
    return DecayCurve(float(t), phi, lags, norms, _fit_rate(lags, norms))


# -- sharpness --------------------------------------------------------------

@dataclass
class SharpnessReport:
    t: float
    omega0: float
    r0: float
    top_semisimple: bool
    # semisimple route: per eigenfunction, max relative deviation of
    # norm(kT)/norm(0) from r0^k
    period_ratio_errors: list = dc_field(default_factory=list)
    fitted_rates: list = dc_field(default_factory=list)
    # defective route: R_k = norm(kT) / r0^k for the generalized eigenfunction
    jordan_ratios: Optional[np.ndarray] = None
    jordan_slope: Optional[float] = None
    jordan_slope_required: Optional[float] = None

    @property
    def sharp_rate_ok(self) -> bool:
        return all(e <= 1e-8 for e in self.period_ratio_errors) and all(
            abs(r - self.omega0) <= 1e-6 for r in self.fitted_rates)

    @property
    def jordan_growth_ok(self) -> bool:
        if self.jordan_ratios is None:
            return False
        increasing = bool(np.all(np.diff(self.jordan_ratios) > 0))
        return increasing and self.jordan_slope >= self.jordan_slope_required


def verify_sharpness(field, t: float, k_max: int = 20) -> SharpnessReport:
    """Exact-rate decay of the top degree-1 eigenfunctions at lags ``kT``.

    When a top multiplier is defective, also follows the generalized
    eigenfunction ``psi`` (``V psi = lam psi - phi``), for which
    ``norm(kT) / r0^k`` grows linearly with slope ``||phi|| / |lam|``.
    """
    prop = get_propagator(field)
    if not prop.field.periodic:
        raise UsageError("sharpness needs a periodic field")
    fl = prop.floquet()
    T = fl.period
    lags = T * np.arange(k_max + 1)
    law = entrance_law(prop, t)
    rep = SharpnessReport(float(t), fl.omega0, fl.r0, fl.top_semisimple)
    top = [p for p in linear_eigenpairs(prop, t) if abs(abs(p.lam) - fl.r0) <= 1e-6 * fl.r0]
    for pair in top:
        curve = decay_curve(prop, t, pair.phi, lags)
        ratios = curve.norms / curve.norms[0]
        expected = fl.r0 ** np.arange(k_max + 1)
        rep.period_ratio_errors.append(float(np.max(np.abs(ratios / expected - 1))))
        rep.fitted_rates.append(curve.fitted_rate)
    if not fl.top_semisimple:
        pair = top[0]
        gen = linear_generalized_pair(prop, t, pair)
        curve = decay_curve(prop, t, gen.psi, lags)
        R = curve.norms / fl.r0 ** np.arange(k_max + 1)
        ks = np.arange(k_max + 1)
        tail = ks >= k_max // 2
        rep.jordan_ratios = R
        rep.jordan_slope = float(np.polyfit(ks[tail], R[tail], 1)[0])
        rep.jordan_slope_required = 0.9 * l2_norm(law, pair.phi) / abs(pair.lam)
    return rep


def refute_subrate(field, t: float, omega: float, base_lag: float = 25.0):
    """Show that ``omega < omega0`` admits no finite ``M``.

    Uses the top eigenfunction at lags ``L`` and ``2L`` (``L`` the first period
    multiple ``>= base_lag``).  Returns ``(growth, required)``: the factor by
    which ``norm / (e^{omega lag} ||phi||)`` grows from ``L`` to ``2L``, and
    ``e^{(omega0 - omega) base_lag}``.
    """
    prop = get_propagator(field)
    fl = prop.floquet()
    if not omega < fl.omega0:
        raise UsageError("refutation needs omega below the growth bound")
    T = fl.period
    L = T * math.ceil(base_lag / T - 1e-12)
    pair = max(linear_eigenpairs(prop, t), key=lambda p: abs(p.lam))
    curve = decay_curve(prop, t, pair.phi, [L, 2 * L])
    need = curve.norms / np.exp(omega * curve.lags)
    return float(need[1] / need[0]), math.exp((fl.omega0 - omega) * base_lag)


# -- c0 -----------------------------------------------------------------------

@dataclass
class DecayProfile:
    omega0: float
    r0: Optional[float]
    M_table: dict
    mu0: float
    C: float
    c0: float
    c0_omega: float
    omega_grid: tuple

    def to_dict(self) -> dict:
        return {
            "omega0": self.omega0,
            "r0": self.r0,
            "mu0": self.mu0,
            "C": self.C,
            "c0": self.c0,
            "c0_omega": self.c0_omega,
            "M_table": [[w, m] for w, m in sorted(self.M_table.items())],
        }


def default_omega_grid(omega0: float, n: int = 32) -> np.ndarray:
    """``n`` log-spaced rates between ``omega0 (1 - 1e-3)`` and ``omega0 * 1e-2``."""
    return -np.geomspace(-omega0 * (1 - 1e-3), -omega0 * 1e-2, n)


def compute_c0(field, omega_grid=None, include_boundary: bool = True) -> DecayProfile:
    """``c0 = min_omega omega mu0^2 / (M(omega)^2 C^2)`` over a rate grid.

    For periodic fields with semisimple top multipliers ``M(omega0)`` is
    finite and the boundary rate ``omega0`` is added to the default grid.
    """
    prop = get_propagator(field)
    w0 = prop.estimate_growth_bound()
    if w0 >= 0:
        raise UsageError("c0 needs a negative growth bound")
    grid = default_omega_grid(w0) if omega_grid is None else np.asarray(omega_grid, float)
    if grid.size == 0:
        raise UsageError("omega grid is empty")
    table = {float(w): prop.estimate_M(w).value for w in grid}
    fl = prop.floquet() if prop.field.periodic else None
    if include_boundary and omega_grid is None and fl is not None and fl.top_semisimple:
        table[float(w0)] = prop.estimate_M_at_growth_bound().value
    mu0, C = prop.field.mu0, prop.field.normC
    vals = {w: w * mu0 ** 2 / (m ** 2 * C ** 2) for w, m in table.items()}
    best = min(vals, key=vals.get)
    return DecayProfile(w0, fl.r0 if fl else None, table, mu0, C, vals[best], best,
                        tuple(sorted(table)))


# -- bounds -------------------------------------------------------------------

@dataclass
class Margins:
    """Rows ``(observable index, lag, norm, bound, margin)``."""

    rows: list
    threshold: float

    @property
    def min_margin(self) -> float:
        return min(r[4] for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.min_margin >= self.threshold

    def to_csv(self, path):
        return write_csv(path, ["observable", "lag", "norm", "bound", "margin"], self.rows)


def _bound_rows(field, t, phis, lags, rate_bound: Callable[[float], float]):
    prop = get_propagator(field)
    law = entrance_law(prop, t)
    rows = []
    for i, phi in enumerate(phis):
        curve = decay_curve(prop, t, phi, lags)
        ref = l2_norm(law, phi)
        for lag, nrm in zip(curve.lags, curve.norms):
            bound = rate_bound(lag) * ref
            rows.append((i, float(lag), float(nrm), bound, bound - nrm))
    return rows


def verify_decay_bound(field, t, phis, lags, omega: float) -> Margins:
    """``||P_{s,t}(phi - M_t phi)|| <= M(omega) e^{omega lag} ||phi||`` with slack ``1e-8``."""
    prop = get_propagator(field)
    M = prop.estimate_M(omega).value
    rows = _bound_rows(prop, t, phis, lags, lambda lag: M * math.exp(omega * lag))
    rows = [(i, lag, n, b * (1 + 1e-8), b * (1 + 1e-8) - n) for i, lag, n, b, _ in rows]
    return Margins(rows, 0.0)


def verify_global_decay(field, t, phis, lags, profile: Optional[DecayProfile] = None) -> Margins:
    """``margin = e^{c0 lag} ||phi||_{nu_t} - ||P_{s,t}(phi - M_t phi)||_{nu_s}``."""
    profile = profile or compute_c0(field)
    c0 = profile.c0
    return Margins(_bound_rows(field, t, phis, lags, lambda lag: math.exp(c0 * lag)), -1e-9)


def _grad_sq_integral(law, phi, quad_order: int = 40) -> float:
    """``int |D phi|^2 d law``."""
    if isinstance(phi, Polynomial):
        return float(np.real(sum((d * d.conj()).expectation(law.mean, law.cov)
                                 for d in phi.gradient())))
    if isinstance(phi, ExpSum):
        total = 0.0
        for i in range(phi.n):
            d = ExpSum(phi.coefs * phi.freqs[:, i], phi.freqs)
            total += float(np.real((d * d.conj()).expectation(law.mean, law.cov)))
        return total
    g = Generic(lambda X: np.sum(np.abs(gradient(phi, X)) ** 2, axis=1), len(law.mean))
    return float(np.real(gaussian_expectation(law, g, quad_order)))


def _variance(law, phi, quad_order: int = 40) -> float:
    if isinstance(phi, (Polynomial, ExpSum)):
        mean = mean_functional(law, phi)
        return l2_norm(law, phi - mean) ** 2
    mean = gaussian_expectation(law, phi, quad_order)
    sq = Generic(lambda X: np.abs(np.asarray(phi(X)) - mean) ** 2, len(law.mean))
    return float(np.real(gaussian_expectation(law, sq, quad_order)))


def verify_poincare(field, t_grid, phis, omega: Optional[float] = None) -> Margins:
    """Per-slice ``Var_{nu_t} phi <= M(omega)^2 C^2 / (2|omega|) int |D phi|^2 d nu_t``.

    ``omega`` defaults to the growth bound itself when ``M`` is finite there
    (periodic, semisimple top multipliers) and to ``omega0 / 2`` otherwise.
    Rows are ``(observable, t, variance, bound, margin)``.
    """
    prop = get_propagator(field)
    w0 = prop.estimate_growth_bound()
    if omega is None:
        if prop.field.periodic and prop.floquet().top_semisimple:
            omega, M = w0, prop.estimate_M_at_growth_bound().value
        else:
            omega = 0.5 * w0
            M = prop.estimate_M(omega).value
    else:
        M = prop.estimate_M(omega).value
    const = M ** 2 * prop.field.normC ** 2 / (2 * abs(omega))
    rows = []
    for i, phi in enumerate(phis):
        for t in t_grid:
            law = entrance_law(prop, t)
            var = _variance(law, phi)
            bound = const * _grad_sq_integral(law, phi)
            rows.append((i, float(t), var, bound, bound - var))
    return Margins(rows, -1e-8)


# -- projection and space-time transfer -----------------------------------------

def project_pi(field, u: Callable[[float], object], t_grid) -> np.ndarray:
    """``(Pi u)(t) = M_t u(t, .)`` on ``t_grid``."""
    prop = get_propagator(field)
    return np.array([mean_functional(entrance_law(prop, t), u(t)) for t in t_grid])


def spacetime_decay(field, s_grid, xi: Callable[[float], float], phi, tau: float,
                    profile: Optional[DecayProfile] = None):
    """Discretised ``||P_tau (u - Pi u)||`` vs ``e^{c0 tau} ||u||`` for ``u = xi(t) phi(x)``.

    The evolution semigroup acts slice-wise, ``(P_tau u)(s) = P_{s,s+tau} u(s+tau)``,
    so each slice obeys the global decay bound and the sums follow.
    Returns ``(lhs, rhs)`` with uniform weights on ``s_grid``.
    """
    prop = get_propagator(field)
    profile = profile or compute_c0(prop)
    lhs = rhs = 0.0
    for s in s_grid:
        t = float(s) + tau
        law_t = entrance_law(prop, t)
        w = abs(xi(t)) ** 2
        if w == 0:
            continue
        _check_closed_form(phi)
        lhs += w * _image_norm(prop, float(s), t, phi) ** 2
        rhs += w * l2_norm(law_t, phi) ** 2
    return math.sqrt(lhs), math.exp(profile.c0 * tau) * math.sqrt(rhs)
