"""Evolution operator ``U(t,s)`` of ``xi' = A(t) xi`` and its companions.

Everything is integrated with classical RK4 on a uniform step.  Because the
equations are linear, one RK4 step is a fixed matrix built from the
coefficients at the three stage times; the step matrices are assembled in a
batch and multiplied together with a balanced tree, which keeps the cost in
numpy rather than in a Python loop.

Three flows share the same steps:

* ``Y = [[U, g], [0, 1]]`` with ``Y' = [[A, f], [0, 0]] Y``,
* ``vec Q`` with ``(vec Q)' = (I (x) A + A (x) I) vec Q + vec(B B^T)``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coefficients import CoefficientField, DomainError, UsageError

__all__ = [
    "Propagator",
    "FloquetData",
    "MEstimate",
    "Kernel",
    "compose",
    "get_propagator",
    "set_default_ode_tol",
    "numerical_rank",
    "is_semisimple",
]

Kernel = tuple  # (U, g, Q)


def compose(later: Kernel, earlier: Kernel) -> Kernel:
    """Kernel over ``[s, t]`` from kernels over ``[r, t]`` (later) and ``[s, r]``."""
    U2, g2, Q2 = later
    U1, g1, Q1 = earlier
    Q = U2 @ Q1 @ U2.T + Q2
    return U2 @ U1, U2 @ g1 + g2, 0.5 * (Q + Q.T)


def _tree_product(mats: np.ndarray) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]`` via pairwise reduction."""
    while len(mats) > 1:
        if len(mats) % 2:
            head = mats[:-1]
            pairs = head[1::2] @ head[0::2]
            mats = np.concatenate([pairs, mats[-1:]], axis=0)
        else:
            mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _rk4_step_matrices(K0, Km, K1, h):
    """RK4 one-step propagators for ``y' = K(t) y`` (batched over steps)."""
    m = K0.shape[-1]
    eye = np.eye(m)
    k1 = K0
    k2 = Km @ (eye + 0.5 * h * k1)
    k3 = Km @ (eye + 0.5 * h * k2)
    k4 = K1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def numerical_rank(M: np.ndarray, tol: float) -> int:
    sv = np.linalg.svd(np.asarray(M), compute_uv=False)
    return int(np.sum(sv > tol))


def is_semisimple(M: np.ndarray, lam: complex, tol: float = 1e-6) -> bool:
    """``rank(lam I - M) == rank((lam I - M)^2)`` at threshold ``tol * ||M||``.

    Raises ``UsageError`` when ``lam`` is not an eigenvalue of ``M`` within
    ``sqrt(tol) * ||M||`` (defective eigenvalues are only computed to about
    ``sqrt(eps)``, hence the square root).
    """
    M = np.asarray(M, dtype=complex)
    scale = max(np.linalg.norm(M, 2), 1e-300)
    eigs = np.linalg.eigvals(M)
    if np.min(np.abs(eigs - lam)) > math.sqrt(tol) * scale:
        raise UsageError(f"{lam} is not an eigenvalue of the matrix")
    N = lam * np.eye(len(M)) - M
    thr = tol * scale
    return numerical_rank(N, thr) == numerical_rank(N @ N, thr * scale)


@dataclass(frozen=True)
class FloquetData:
    monodromy: np.ndarray
    multipliers: np.ndarray
    r0: float
    omega0: float
    semisimple_flags: tuple
    period: float

    @property
    def top_semisimple(self) -> bool:
        """True when every multiplier of modulus ``r0`` is semisimple."""
        top = np.abs(np.abs(self.multipliers) - self.r0) <= 1e-6 * self.r0
        return all(f for f, t in zip(self.semisimple_flags, top) if t)


@dataclass(frozen=True)
class MEstimate:
    """Grid lower estimate of ``sup ||U(t,s)|| exp(-omega (t-s))``."""

    value: float
    omega: float
    argmax_s: float
    argmax_gap: float
    s_step: float
    gap_step: float
    max_gap: float

    def __float__(self):
        return self.value


def _spectral_norms(mats: np.ndarray) -> np.ndarray:
    """Largest singular value of each matrix in a stack (small matrices)."""
    gram = np.swapaxes(mats, -1, -2) @ mats
    return np.sqrt(np.maximum(np.linalg.eigvalsh(gram)[..., -1], 0.0))


class Propagator:
    """RK4 evolution operator for a :class:`CoefficientField`.

    Parameters
    ----------
    field
        Coefficient data.
    ode_tol
        Target accuracy; the step is halved until two RK4 sweeps at ``h`` and
        ``h/2`` over a probe interval agree to ``ode_tol`` (relative for ``U``,
        absolute for ``g`` and ``Q``), and the finer of the two is kept.
    step
        Base step.  Defaults to ``0.1 / max ||A||``.
    """

    def __init__(self, field: CoefficientField, ode_tol: float = 1e-10,
                 step: Optional[float] = None):
        if not ode_tol > 0:
            raise UsageError("ode_tol must be positive")
        self.field = field
        self.n = field.dim
        self.ode_tol = float(ode_tol)
        self._lock = threading.Lock()
        self._period_cache: dict = {}
        self._law_cache: dict = {}
        self._floquet: Optional[FloquetData] = None
        self._norm_cache: dict = {}
        if step is None:
            probe = np.linspace(0.0, field.period or 1.0, 257)
            A, _, _ = field.batch(probe)
            amax = float(_spectral_norms(A).max())
            step = 0.1 / max(amax, 1.0)
        self.step = self._calibrate(float(step))

    # -- integration --------------------------------------------------------
    def _step_mats(self, s: float, t: float, h: float):
        N = max(1, int(math.ceil((t - s) / h - 1e-9)))
        hh = (t - s) / N
        times = s + hh * np.arange(2 * N + 1) / 2.0
        A, B, f = self.field.batch(times)
        n = self.n
        # affine flow for (U, g)
        Ka = np.zeros((len(times), n + 1, n + 1))
        Ka[:, :n, :n] = A
        Ka[:, :n, n] = f
        # affine flow for vec Q (row-major vec: vec(AQ + QA^T) = (A (x) I + I (x) A) vec Q)
        eye = np.eye(n)
        Kq = np.zeros((len(times), n * n + 1, n * n + 1))
        Kq[:, :n * n, :n * n] = (np.einsum("tij,kl->tikjl", A, eye)
                                 + np.einsum("ij,tkl->tikjl", eye, A)).reshape(-1, n * n, n * n)
        D = B @ np.swapaxes(B, 1, 2)
        Kq[:, :n * n, n * n] = D.reshape(-1, n * n)
        Pa = _rk4_step_matrices(Ka[0:-1:2], Ka[1::2], Ka[2::2], hh)
        Pq = _rk4_step_matrices(Kq[0:-1:2], Kq[1::2], Kq[2::2], hh)
        return Pa, Pq

    def _unpack(self, Ya, Yq) -> Kernel:
        n = self.n
        U = Ya[:n, :n].copy()
        g = Ya[:n, n].copy()
        Q = Yq[:n * n, n * n].reshape(n, n)
        return U, g, 0.5 * (Q + Q.T)

    def _integrate(self, s: float, t: float, h: Optional[float] = None) -> Kernel:
        if t == s:
            n = self.n
            return np.eye(n), np.zeros(n), np.zeros((n, n))
        Pa, Pq = self._step_mats(s, t, h or self.step)
        return self._unpack(_tree_product(Pa), _tree_product(Pq))

    def _calibrate(self, h: float) -> float:
        L = self.field.period or 1.0
        s0 = 0.0
        for _ in range(30):
            coarse = self._integrate(s0, s0 + L, h)
            fine = self._integrate(s0, s0 + L, h / 2)
            # U is checked relative to its size so small monodromies keep their digits
            rel = np.abs(coarse[0] - fine[0]).max() / max(np.abs(fine[0]).max(), 1e-300)
            err = max(rel, np.abs(coarse[1] - fine[1]).max(), np.abs(coarse[2] - fine[2]).max())
            if err <= self.ode_tol:
                # the finer sweep is ~16x more accurate than the agreement measured
                return h / 2
            h /= 2
        raise RuntimeError("step calibration did not converge")

    # -- public operations --------------------------------------------------
    def kernel(self, s: float, t: float) -> Kernel:
        """``(U(t,s), g(t,s), Q(t,s))`` for ``s <= t``."""
        s, t = float(s), float(t)
        if not (math.isfinite(s) and math.isfinite(t)):
            raise DomainError("times must be finite")
        if s > t:
            raise UsageError(f"need s <= t, got s={s}, t={t}")
        T = self.field.period
        if T is None or t - s <= T:
            return self._integrate(s, t)
        k = int(math.floor((t - s) / T))
        head = self._integrate(s + k * T, t)
        return compose(head, self._period_power(s, k))

    def propagate(self, s: float, t: float) -> np.ndarray:
        return self.kernel(s, t)[0]

    def kernel_path(self, times) -> list:
        """Kernels ``K(times[i+1], times[i])`` for an increasing time list."""
        ts = np.asarray(times, dtype=float)
        if np.any(np.diff(ts) < 0):
            raise UsageError("times must be nondecreasing")
        return [self.kernel(a, b) for a, b in zip(ts[:-1], ts[1:])]

    def period_kernel(self, s: float) -> Kernel:
        """One-period kernel ``K(s+T, s)``, cached by ``s``."""
        T = self.field.period
        if T is None:
            raise UsageError("field is not periodic")
        key = round(float(s), 12)
        with self._lock:
            hit = self._period_cache.get(key)
        if hit is None:
            hit = self._integrate(float(s), float(s) + T)
            with self._lock:
                self._period_cache[key] = hit
        return hit

    def _period_power(self, s: float, k: int) -> Kernel:
        base = self.period_kernel(s)
        n = self.n
        result = (np.eye(n), np.zeros(n), np.zeros((n, n)))
        while k:
            if k & 1:
                result = compose(base, result)
            k >>= 1
            if k:
                base = compose(base, base)
        return result

    def floquet(self) -> FloquetData:
        T = self.field.period
        if T is None:
            raise UsageError("Floquet data requires a periodic field")
        if self._floquet is None:
            M = self.period_kernel(0.0)[0]
            mult = np.linalg.eigvals(M)
            order = np.lexsort((-mult.imag, -np.abs(mult)))
            mult = mult[order]
            r0 = float(np.abs(mult).max())
            scale = max(np.linalg.norm(M, 2), 1e-300)
            flags = []
            for mu in mult:
                cluster = mult[np.abs(mult - mu) <= 1e-6 * scale]
                flags.append(is_semisimple(M, complex(cluster.mean())))
            self._floquet = FloquetData(M, mult, r0, math.log(r0) / T,
                                        tuple(flags), T)
        return self._floquet

    def estimate_growth_bound(self, horizon: float = 20.0, grid=None) -> float:
        """``omega0`` exactly from Floquet data, or a grid estimate if aperiodic."""
        if not horizon > 0:
            raise UsageError("horizon must be positive")
        if self.field.periodic:
            return self.floquet().omega0
        ss = np.linspace(-10.0, 10.0, 21) if grid is None else np.asarray(grid, float)
        if ss.size == 0:
            raise UsageError("grid is empty")
        rates = [math.log(np.linalg.norm(self.propagate(s, s + horizon), 2)) / horizon
                 for s in ss]
        return float(max(rates))

    def estimate_M(self, omega: float, s_grid=None, gap_grid=None,
                   horizon: float = 20.0) -> MEstimate:
        """Grid estimate of ``M(omega) = sup ||U(t,s)|| e^{-omega (t-s)}``.

        Periodic fields use ``U(s + kT + r, s) = U(s + r, s) U(s + T, s)^k`` with
        ``s, r`` on grids over one period and ``k`` extended until the
        ``k``-dependence has died out; aperiodic fields use plain grids.
        """
        omega = float(omega)
        w0 = self.estimate_growth_bound(horizon)
        if omega <= w0:
            raise UsageError(f"omega={omega} must exceed the growth bound {w0}")
        if self.field.periodic and gap_grid is None:
            return self._estimate_M_periodic(omega, w0, s_grid)
        ss = np.linspace(-10.0, 10.0, 21) if s_grid is None else np.asarray(s_grid, float)
        gaps = (np.linspace(0.0, 40.0, 401) if gap_grid is None
                else np.asarray(gap_grid, float))
        if ss.size == 0 or gaps.size == 0:
            raise UsageError("grids must be non-empty")
        gaps = np.sort(gaps)
        logvals = self._grid_log_norms(ss, gaps) - omega * gaps[None, :]
        i, j = np.unravel_index(np.argmax(logvals), logvals.shape)
        best = (float(math.exp(logvals[i, j])), float(ss[i]), float(gaps[j]))
        return MEstimate(best[0], omega, best[1], best[2],
                         float(np.diff(np.sort(ss)).min()) if ss.size > 1 else 0.0,
                         float(np.diff(gaps).min()) if gaps.size > 1 else 0.0,
                         float(gaps.max()))

    def _grid_log_norms(self, ss: np.ndarray, gaps: np.ndarray) -> np.ndarray:
        """``log ||U(s + gap, s)||`` on an (s, gap) grid, cached per grid."""
        key = ("grid", ss.tobytes(), gaps.tobytes())
        with self._lock:
            hit = self._norm_cache.get(key)
        if hit is not None:
            return hit
        out = np.empty((len(ss), len(gaps)))
        for i, s in enumerate(ss):
            U = np.eye(self.n)
            prev = float(s)
            for j, gap in enumerate(gaps):
                U = self.propagate(prev, s + gap) @ U
                prev = s + gap
                out[i, j] = np.log(np.linalg.norm(U, 2))
        with self._lock:
            self._norm_cache[key] = out
        return out

    def _period_norm_table(self, n_s: int, n_r: int, K: int):
        """Log norms ``log ||U(s+r, s) M_s^k||`` on the (s, r, k) grid, cached and extended."""
        T = self.field.period
        key = (n_s, n_r)
        with self._lock:
            entry = self._norm_cache.get(key)
        if entry is None:
            ss = T * np.arange(n_s) / n_s
            rs = T * np.arange(n_r) / n_r
            Ur = np.empty((n_s, n_r, self.n, self.n))
            Ms = np.empty((n_s, self.n, self.n))
            for i, s in enumerate(ss):
                U = np.eye(self.n)
                prev = s
                for j, r in enumerate(rs):
                    U = self.propagate(prev, s + r) @ U
                    prev = s + r
                    Ur[i, j] = U
                Ms[i] = self.period_kernel(s)[0]
            entry = {"ss": ss, "rs": rs, "Ur": Ur, "Ms": Ms,
                     "power": np.broadcast_to(np.eye(self.n), Ms.shape).copy(),
                     "logscale": np.zeros(n_s),
                     "lognorms": np.empty((n_s, n_r, 0))}
        lognorms = entry["lognorms"]
        if lognorms.shape[2] < K:
            chunks = [lognorms]
            # M_s^k is kept as P * exp(logscale) with ||P|| = 1 to avoid underflow
            P, logscale = entry["power"], entry["logscale"]
            have = lognorms.shape[2]
            while have < K:
                m = min(K - have, 2048)
                block = np.empty((m,) + P.shape)
                scales = np.empty((m, n_s))
                for i in range(m):
                    block[i] = P
                    scales[i] = logscale
                    P = P @ entry["Ms"]
                    nrm = _spectral_norms(P)
                    P = P / nrm[:, None, None]
                    logscale = logscale + np.log(nrm)
                # (m, n_s, n, n) -> (n_s, n_r, m)
                prod = entry["Ur"][None, :, :, :, :] @ block[:, :, None, :, :]
                with np.errstate(divide="ignore"):
                    logs = np.log(_spectral_norms(prod)) + scales[:, :, None]
                chunks.append(np.moveaxis(logs, 0, 2))
                have += m
            entry["power"], entry["logscale"] = P, logscale
            entry["lognorms"] = np.concatenate(chunks, axis=2)
        with self._lock:
            self._norm_cache[key] = entry
        return entry

    def estimate_M_at_growth_bound(self, s_grid=None) -> MEstimate:
        """``M(omega0)`` for a periodic field whose top multipliers are semisimple.

        Then ``||U(s + kT + r, s)|| r0^{-k}`` stays bounded and settles once the
        subdominant multipliers have died out, so the supremum is finite and
        the same grid estimate applies with ``k`` covering that transient.
        """
        if not self.field.periodic:
            raise UsageError("M at the growth bound needs a periodic field")
        fl = self.floquet()
        if not fl.top_semisimple:
            raise UsageError("top multipliers are not semisimple: M(omega0) is infinite")
        T = fl.period
        mods = np.abs(fl.multipliers)
        sub = mods[mods < fl.r0 * (1 - 1e-6)]
        if sub.size:
            gap = (math.log(fl.r0) - math.log(float(sub.max()))) / T
            K = int(min(math.ceil(30.0 / (gap * T)) + 40, 60000))
        else:
            K = 40
        return self._estimate_M_periodic(fl.omega0, fl.omega0, s_grid, K=K)

    def _estimate_M_periodic(self, omega, w0, s_grid, n_r: int = 16,
                             K: Optional[int] = None) -> MEstimate:
        T = self.field.period
        n_s = 8 if s_grid is None else int(s_grid)
        if K is None:
            K = int(min(math.ceil(25.0 / ((omega - w0) * T)) + 20, 60000))
        tab = self._period_norm_table(n_s, n_r, K)
        taus = tab["rs"][:, None] + T * np.arange(K)[None, :]
        logvals = tab["lognorms"][:, :, :K] - omega * taus[None, :, :]
        i, j, k = np.unravel_index(np.argmax(logvals), logvals.shape)
        return MEstimate(float(math.exp(logvals[i, j, k])), omega, float(tab["ss"][i]),
                         float(taus[j, k]), T / n_s, T / n_r, float(taus[-1, -1]))


_PROPAGATORS: dict = {}
_PROP_LOCK = threading.Lock()
_DEFAULT_ODE_TOL = [1e-10]


def set_default_ode_tol(ode_tol: float) -> float:
    """Set the tolerance used when a field is passed without one; returns the old value."""
    if not ode_tol > 0:
        raise UsageError("ode_tol must be positive")
    old = _DEFAULT_ODE_TOL[0]
    _DEFAULT_ODE_TOL[0] = float(ode_tol)
    return old


def get_propagator(obj, ode_tol: Optional[float] = None) -> Propagator:
    """Shared :class:`Propagator` for a field (or pass a propagator through)."""
    if isinstance(obj, Propagator):
        return obj
    if ode_tol is None:
        ode_tol = _DEFAULT_ODE_TOL[0]
    if not isinstance(obj, CoefficientField):
        raise UsageError(f"expected a CoefficientField or Propagator, got {type(obj)}")
    key = (id(obj), ode_tol)
    with _PROP_LOCK:
        entry = _PROPAGATORS.get(key)
        if entry is not None and entry[0] is obj:
            return entry[1]
    prop = Propagator(obj, ode_tol=ode_tol)
    with _PROP_LOCK:
        _PROPAGATORS[key] = (obj, prop)
    return prop
