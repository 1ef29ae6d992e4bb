"""Time-dependent coefficient data ``A(t)``, ``B(t)``, ``f(t)`` of the OU family.

A :class:`CoefficientField` carries three callables plus the declared
constants ``mu0`` (ellipticity: ``|B(t)x| >= mu0 |x|``) and ``normC``
(``sup_t ||B(t)||``).  Matrix norms are spectral norms throughout.

Builtin fields have closed forms so that tests have analytic ground truth;
:func:`fourier_field` covers generic smooth periodic data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "CoefficientField",
    "CertificateReport",
    "DomainError",
    "UsageError",
    "eval_field",
    "certify",
    "autonomous",
    "scalar_periodic",
    "rotation_decay",
    "nonnormal_jordan",
    "scalar_aperiodic",
    "coupled_periodic",
    "fourier_field",
    "BUILTINS",
    "builtin",
]


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class UsageError(ValueError):
    """Operation called with inconsistent or unsupported arguments."""


MatrixFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Coefficients of ``dX = (A(t)X + f(t))dt + B(t)dW``.

    ``A``, ``B`` and ``f`` accept an array of times of shape ``(m,)`` and
    return arrays of shape ``(m, n, n)``, ``(m, n, n)`` and ``(m, n)``.
    Instances hash by identity so they can key caches.
    """

    name: str
    dim: int
    A: MatrixFn
    B: MatrixFn
    f: MatrixFn
    mu0: float
    normC: float
    period: Optional[float] = None
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise UsageError("dim must be a positive integer")
        if not (self.mu0 > 0 and self.normC >= self.mu0):
            raise UsageError("need 0 < mu0 <= normC")
        if self.period is not None and not self.period > 0:
            raise UsageError("period must be positive")

    @property
    def periodic(self) -> bool:
        return self.period is not None

    def batch(self, times):
        """Evaluate ``(A, B, f)`` on a 1-d array of times."""
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        n = self.dim
        A = np.asarray(self.A(ts), dtype=float).reshape(len(ts), n, n)
        B = np.asarray(self.B(ts), dtype=float).reshape(len(ts), n, n)
        f = np.asarray(self.f(ts), dtype=float).reshape(len(ts), n)
        return A, B, f


def eval_field(field: CoefficientField, t: float):
    """Return ``(A(t), B(t), f(t))`` at a single finite time."""
    t = float(t)
    if not math.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    A, B, f = field.batch([t])
    return A[0], B[0], f[0]


@dataclass(frozen=True)
class CertificateReport:
    field: str
    n_points: int
    t_min: float
    t_max: float
    min_sigma_B: float
    max_norm_B: float
    max_norm_A: float
    max_abs_f: float
    mu0_ok: bool
    normC_ok: bool
    periodicity_residual: Optional[float]
    periodic_ok: Optional[bool]

    @property
    def passed(self) -> bool:
        return self.mu0_ok and self.normC_ok and self.periodic_ok is not False


def certify(field: CoefficientField, grid, rtol: float = 1e-12,
            periodic_tol: float = 1e-12) -> CertificateReport:
    """Check the declared ``mu0``/``normC`` (and periodicity) on a time grid."""
    ts = np.asarray(grid, dtype=float).ravel()
    if ts.size == 0:
        raise UsageError("certification grid is empty")
    if not np.all(np.isfinite(ts)):
        raise DomainError("certification grid contains non-finite times")
    A, B, f = field.batch(ts)
    svB = np.linalg.svd(B, compute_uv=False)
    min_sig = float(svB[:, -1].min())
    max_B = float(svB[:, 0].max())
    max_A = float(np.linalg.norm(A, ord=2, axis=(1, 2)).max())
    max_f = float(np.linalg.norm(f, axis=1).max())
    residual = ok_per = None
    if field.periodic:
        A2, B2, f2 = field.batch(ts + field.period)
        residual = float(max(np.abs(A2 - A).max(), np.abs(B2 - B).max(),
                             np.abs(f2 - f).max()))
        ok_per = residual <= periodic_tol
    return CertificateReport(
        field=field.name, n_points=int(ts.size),
        t_min=float(ts.min()), t_max=float(ts.max()),
        min_sigma_B=min_sig, max_norm_B=max_B, max_norm_A=max_A, max_abs_f=max_f,
        mu0_ok=min_sig >= field.mu0 * (1 - rtol),
        normC_ok=max_B <= field.normC * (1 + rtol),
        periodicity_residual=residual, periodic_ok=ok_per,
    )


def _const(mat):
    mat = np.asarray(mat, dtype=float)

    def fn(ts):
        ts = np.atleast_1d(ts)
        return np.broadcast_to(mat, (len(ts),) + mat.shape).copy()

    return fn


def _as_matrix(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x * np.eye(n)
    return x.reshape(n, n)


def autonomous(a=-1.0, b=1.0, n=1, f=0.0, period=1.0,
               name=None) -> CoefficientField:
    """Constant coefficients; ``a``/``b`` scalars mean multiples of the identity."""
    A = _as_matrix(a, n)
    B = _as_matrix(b, n)
    fv = np.broadcast_to(np.asarray(f, dtype=float), (n,)).copy()
    sv = np.linalg.svd(B, compute_uv=False)
    return CoefficientField(
        name=name or "autonomous", dim=n, A=_const(A), B=_const(B), f=_const(fv),
        mu0=float(sv[-1]), normC=float(sv[0]), period=period,
        params={"a": A.tolist(), "b": B.tolist(), "f": fv.tolist()},
    )


def scalar_periodic(b=1.0, f=0.0, amp=1.0) -> CoefficientField:
    """``a(t) = -1 + amp*sin t``, period ``2*pi``."""

    def A(ts):
        return (-1.0 + amp * np.sin(np.atleast_1d(ts))).reshape(-1, 1, 1)

    return CoefficientField(
        name="scalar_periodic", dim=1, A=A, B=_const([[b]]), f=_const([f]),
        mu0=abs(b), normC=abs(b), period=2 * math.pi,
        params={"b": b, "f": f, "amp": amp},
    )


def rotation_decay(omega=2.0, rate=1.0, b=1.0, period=1.0) -> CoefficientField:
    """``A = [[-rate, omega], [-omega, -rate]]`` (normal), ``B = b I``."""
    A = np.array([[-rate, omega], [-omega, -rate]])
    return CoefficientField(
        name="rotation_decay", dim=2, A=_const(A), B=_const(b * np.eye(2)),
        f=_const(np.zeros(2)), mu0=abs(b), normC=abs(b), period=period,
        params={"omega": omega, "rate": rate, "b": b},
    )


def nonnormal_jordan(rate=1.0, coupling=1.0, b=1.0, period=1.0) -> CoefficientField:
    """``A = [[-rate, coupling], [0, -rate]]``: non-semisimple monodromy."""
    A = np.array([[-rate, coupling], [0.0, -rate]])
    return CoefficientField(
        name="nonnormal_jordan", dim=2, A=_const(A), B=_const(b * np.eye(2)),
        f=_const(np.zeros(2)), mu0=abs(b), normC=abs(b), period=period,
        params={"rate": rate, "coupling": coupling, "b": b},
    )


def scalar_aperiodic(b=1.0, f=0.0) -> CoefficientField:
    """``a(t) = -1 - 0.5/(1+t^2)``: bounded, not periodic."""

    def A(ts):
        ts = np.atleast_1d(ts)
        return (-1.0 - 0.5 / (1.0 + ts ** 2)).reshape(-1, 1, 1)

    return CoefficientField(
        name="scalar_aperiodic", dim=1, A=A, B=_const([[b]]), f=_const([f]),
        mu0=abs(b), normC=abs(b), period=None, params={"b": b, "f": f},
    )


def fourier_field(dim, period, A0, B0, f0=None, A_cos=(), A_sin=(), B_cos=(),
                  B_sin=(), f_cos=(), f_sin=(), mu0=None, normC=None,
                  name="fourier") -> CoefficientField:
    """Finite Fourier series coefficients with harmonics ``2*pi*k*t/T``, k=1,2,...

    ``A_cos[k-1]`` multiplies ``cos(2 pi k t / T)`` and so on.  When ``mu0`` or
    ``normC`` are omitted they are taken from a dense certification grid.
    """
    n = int(dim)
    T = float(period)

    def series(c0, cos_terms, sin_terms, shape):
        c0 = np.zeros(shape) if c0 is None else np.asarray(c0, float).reshape(shape)
        cs = np.asarray(cos_terms, float).reshape((-1,) + shape)
        ss = np.asarray(sin_terms, float).reshape((-1,) + shape)

        def fn(ts):
            ts = np.atleast_1d(np.asarray(ts, float))
            out = np.broadcast_to(c0, (len(ts),) + shape).copy()
            w = 2 * math.pi / T
            for k, c in enumerate(cs, start=1):
                out += np.cos(k * w * ts).reshape((-1,) + (1,) * len(shape)) * c
            for k, s in enumerate(ss, start=1):
                out += np.sin(k * w * ts).reshape((-1,) + (1,) * len(shape)) * s
            return out

        return fn

    Af = series(A0, A_cos, A_sin, (n, n))
    Bf = series(B0, B_cos, B_sin, (n, n))
    ff = series(f0, f_cos, f_sin, (n,))
    if mu0 is None or normC is None:
        grid = np.linspace(0.0, T, 4097)
        sv = np.linalg.svd(Bf(grid), compute_uv=False)
        # keep a 1% safety margin below the sampled minimum
        mu0 = 0.99 * float(sv[:, -1].min()) if mu0 is None else mu0
        normC = 1.01 * float(sv[:, 0].max()) if normC is None else normC
    params = {"A0": np.asarray(A0, float).tolist(), "B0": np.asarray(B0, float).tolist(),
              "f0": None if f0 is None else np.asarray(f0, float).tolist(),
              "A_cos": np.asarray(A_cos, float).tolist(),
              "A_sin": np.asarray(A_sin, float).tolist(),
              "B_cos": np.asarray(B_cos, float).tolist(),
              "B_sin": np.asarray(B_sin, float).tolist(),
              "f_cos": np.asarray(f_cos, float).tolist(),
              "f_sin": np.asarray(f_sin, float).tolist()}
    return CoefficientField(name=name, dim=n, A=Af, B=Bf, f=ff, mu0=float(mu0),
                            normC=float(normC), period=T, params=params)


def coupled_periodic() -> CoefficientField:
    """Two-dimensional periodic field with non-commuting ``A(t)``, varying ``B`` and ``f``."""
    return fourier_field(
        dim=2, period=2.0,
        A0=[[-1.0, 0.6], [-0.4, -1.5]],
        A_cos=[[[0.3, 0.0], [0.5, 0.0]]],
        A_sin=[[[0.0, 0.4], [0.0, -0.2]]],
        B0=[[1.0, 0.2], [0.0, 0.8]],
        B_sin=[[[0.2, 0.0], [0.1, 0.1]]],
        f0=[0.5, -0.3],
        f_cos=[[0.4, 0.0]],
        f_sin=[[0.0, 0.6]],
        name="coupled_periodic",
    )


BUILTINS: dict[str, Callable[..., CoefficientField]] = {
    "scalar_autonomous": lambda **kw: autonomous(
        **{"a": -1.0, "b": math.sqrt(2.0), "name": "scalar_autonomous", **kw}),
    "autonomous": autonomous,
    "scalar_periodic": scalar_periodic,
    "rotation_decay": rotation_decay,
    "nonnormal_jordan": nonnormal_jordan,
    "scalar_aperiodic": scalar_aperiodic,
    "coupled_periodic": coupled_periodic,
}


def builtin(name: str, **params) -> CoefficientField:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UsageError(f"unknown field {name!r}; known: {sorted(BUILTINS)}") from None
    return factory(**params)
