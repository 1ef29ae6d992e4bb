"""Monte-Carlo oracle: Euler-Maruyama paths and exact Gaussian transition samples.

Paths are generated in fixed blocks of ``BLOCK`` paths.  Block ``b`` draws from
its own Philox stream seeded by ``SeedSequence(seed, spawn_key=(b,))``, so the
samples depend only on ``(seed, path index)`` and not on how blocks are
scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import UsageError
from .io import write_csv
from .measures import transition_kernel

__all__ = [
    "PathEnsemble",
    "simulate",
    "exact_sample",
    "mc_expectation",
    "mc_covariance",
    "BLOCK",
]

BLOCK = 4096


def _block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def _blocks(n_paths: int):
    for b, start in enumerate(range(0, n_paths, BLOCK)):
        yield b, start, min(start + BLOCK, n_paths)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    s: float
    t: float
    x0: np.ndarray
    dt: float
    n_paths: int
    seed: int
    terminal_samples: np.ndarray
    method: str = "euler_maruyama"

    def to_csv(self, path):
        n = self.terminal_samples.shape[1]
        header = ["path_id"] + [f"x_{i + 1}" for i in range(n)]
        rows = ([i] + list(row) for i, row in enumerate(self.terminal_samples))
        return write_csv(path, header, rows)


def _validate(s, t, n_paths, seed):
    if not (math.isfinite(s) and math.isfinite(t) and s < t):
        raise UsageError(f"need finite s < t, got s={s}, t={t}")
    if int(n_paths) != n_paths or n_paths < 2:
        raise UsageError(f"n_paths must be an integer >= 2, got {n_paths}")
    if int(seed) != seed or seed < 0:
        raise UsageError("seed must be a nonnegative integer")


def simulate(field, s: float, t: float, x0, dt: float, n_paths: int, seed: int) -> PathEnsemble:
    """Euler-Maruyama for ``dX = (A X + f) dt + B dW`` from ``X_s = x0``.

    The step is ``(t - s) / N`` with ``N = ceil((t - s) / dt)``.
    """
    s, t = float(s), float(t)
    _validate(s, t, n_paths, seed)
    if not (dt > 0 and dt <= (t - s) / 10 * (1 + 1e-12)):
        raise UsageError(f"dt must lie in (0, (t - s)/10], got {dt}")
    n = field.dim
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    N = int(math.ceil((t - s) / dt - 1e-9))
    h = (t - s) / N
    A, B, f = field.batch(s + h * np.arange(N))
    sq = math.sqrt(h)
    out = np.empty((int(n_paths), n))
    for b, lo, hi in _blocks(int(n_paths)):
        rng = _block_rng(seed, b)
        X = np.tile(x0, (hi - lo, 1))
        for k in range(N):
            Z = rng.standard_normal((hi - lo, n))
            X = X + (X @ A[k].T + f[k]) * h + sq * (Z @ B[k].T)
        out[lo:hi] = X
    return PathEnsemble(s, t, x0, h, int(n_paths), int(seed), out)


def exact_sample(field, s: float, t: float, x0, n_paths: int, seed: int) -> PathEnsemble:
    """Draws from the exact transition law ``N(U x0 + g, Q)``."""
    s, t = float(s), float(t)
    _validate(s, t, n_paths, seed)
    law = transition_kernel(field, s, t).law(np.broadcast_to(np.asarray(x0, float), (field.dim,)))
    out = np.empty((int(n_paths), field.dim))
    for b, lo, hi in _blocks(int(n_paths)):
        out[lo:hi] = law.sample(_block_rng(seed, b), hi - lo)
    return PathEnsemble(s, t, np.asarray(x0, float), 0.0, int(n_paths), int(seed), out, "exact")


def mc_expectation(ens: PathEnsemble, phi):
    """Sample mean of ``phi`` over terminal samples and its standard error."""
    vals = np.asarray(phi(ens.terminal_samples))
    if vals.ndim == 0:
        vals = np.full(ens.n_paths, vals)
    mean = vals.mean()
    if np.iscomplexobj(vals):
        var = vals.real.var(ddof=1) + vals.imag.var(ddof=1)
    else:
        var = vals.var(ddof=1)
    return mean, math.sqrt(var / len(vals))


def mc_covariance(ens: PathEnsemble, n_boot: int = 200, seed: int = 0):
    """Sample covariance and entrywise bootstrap standard errors."""
    X = ens.terminal_samples
    cov = np.cov(X, rowvar=False).reshape(X.shape[1], X.shape[1])
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    boots = np.empty((n_boot,) + cov.shape)
    for i in range(n_boot):
        idx = rng.integers(0, len(X), len(X))
        boots[i] = np.cov(X[idx], rowvar=False).reshape(cov.shape)
    return cov, boots.std(axis=0, ddof=1)
