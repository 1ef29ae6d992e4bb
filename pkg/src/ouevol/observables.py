"""Observables: polynomials, sums of (real or complex) exponentials, generic callables.

Exponentials are stored uniformly as ``sum_j c_j exp(<w_j, x>)`` with complex
frequency vectors ``w_j``: ``e^{i<k,x>}`` has ``w = i k`` and ``e^{<k,x>}`` has
``w = k``.  The Gaussian transition law maps such sums to sums of the same
kind, so kernels act on them in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Number
from typing import Callable

import numpy as np

from .polynomial import Polynomial

__all__ = [
    "Polynomial",
    "ExpSum",
    "Generic",
    "ComplexExponential",
    "RealExponential",
    "evaluate",
    "gradient",
    "hessian",
    "monomial",
    "from_callable",
]


class ExpSum:
    """``x -> sum_j coefs[j] * exp(<freqs[j], x>)`` with complex ``freqs``."""

    __slots__ = ("coefs", "freqs")

    def __init__(self, coefs, freqs):
        coefs = np.atleast_1d(np.asarray(coefs, dtype=complex))
        freqs = np.atleast_2d(np.asarray(freqs, dtype=complex))
        if freqs.shape[0] != coefs.shape[0]:
            raise ValueError("one frequency vector per coefficient")
        if not (np.all(np.isfinite(coefs)) and np.all(np.isfinite(freqs))):
            raise ValueError("exponential data must be finite")
        self.coefs = coefs
        self.freqs = freqs

    @property
    def n(self) -> int:
        return self.freqs.shape[1]

    @property
    def is_single(self) -> bool:
        return len(self.coefs) == 1

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.coefs.imag == 0) and np.all(self.freqs.imag == 0))

    def __repr__(self):
        return f"ExpSum(coefs={self.coefs!r}, freqs={self.freqs.tolist()!r})"

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim <= 1
        X = X.reshape(-1, self.n)
        out = np.exp(X @ self.freqs.T) @ self.coefs
        if self.is_real:
            out = out.real
        return out[0] if single else out

    def grad(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n)
        e = np.exp(X @ self.freqs.T) * self.coefs
        out = e @ self.freqs
        return out.real if self.is_real else out

    def hess(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n)
        e = np.exp(X @ self.freqs.T) * self.coefs
        out = np.einsum("mk,ki,kj->mij", e, self.freqs, self.freqs)
        return out.real if self.is_real else out

    def __add__(self, other):
        if isinstance(other, Number):
            other = ExpSum([other], np.zeros((1, self.n)))
        if not isinstance(other, ExpSum):
            return NotImplemented
        return ExpSum(np.concatenate([self.coefs, other.coefs]),
                      np.concatenate([self.freqs, other.freqs]))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Number):
            return ExpSum(self.coefs * other, self.freqs)
        if isinstance(other, ExpSum):
            c = np.outer(self.coefs, other.coefs).ravel()
            w = (self.freqs[:, None, :] + other.freqs[None, :, :]).reshape(-1, self.n)
            return ExpSum(c, w)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return ExpSum(-self.coefs, self.freqs)

    def __sub__(self, other):
        return self + (-other)

    def conj(self) -> "ExpSum":
        return ExpSum(self.coefs.conj(), self.freqs.conj())

    def expectation(self, mean, cov) -> complex:
        """Gaussian mgf, valid for complex frequencies."""
        w = self.freqs
        expo = w @ mean + 0.5 * np.einsum("ki,ij,kj->k", w, cov, w)
        val = np.exp(expo) @ self.coefs
        return val.real if self.is_real else val


def ComplexExponential(k, coef=1.0) -> ExpSum:
    """``coef * exp(i <k, x>)``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return ExpSum([coef], [1j * k])


def RealExponential(k, coef=1.0) -> ExpSum:
    """``coef * exp(<k, x>)``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return ExpSum([coef], [k.astype(complex)])


@dataclass(frozen=True)
class Generic:
    """Any numeric function of ``x``; ``fn`` maps ``(m, n)`` arrays to ``(m,)``.

    Derivatives are central differences: step ``1e-5 (1 + |x|)`` for the
    gradient, ``1e-4 (1 + |x|)`` for the Hessian (balances rounding).
    """

    fn: Callable
    n: int
    smooth: bool = True

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim <= 1
        out = np.asarray(self.fn(X.reshape(-1, self.n)))
        return out[0] if single else out

    def grad(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n)
        h = 1e-5 * (1.0 + np.linalg.norm(X, axis=1))
        cols = []
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = 1.0
            d = h[:, None] * e
            cols.append((self.fn(X + d) - self.fn(X - d)) / (2 * h))
        return np.stack(cols, axis=1)

    def hess(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n)
        h = 1e-4 * (1.0 + np.linalg.norm(X, axis=1))
        out = np.empty((len(X), self.n, self.n), dtype=np.result_type(self.fn(X[:1]), float))
        for i in range(self.n):
            for j in range(self.n):
                ei = np.zeros(self.n)
                ej = np.zeros(self.n)
                ei[i] = 1.0
                ej[j] = 1.0
                di, dj = h[:, None] * ei, h[:, None] * ej
                out[:, i, j] = (self.fn(X + di + dj) - self.fn(X + di - dj)
                                - self.fn(X - di + dj) + self.fn(X - di - dj)) / (4 * h * h)
        return out


def from_callable(fn, n, smooth=True) -> Generic:
    return Generic(fn, n, smooth)


def monomial(alpha, coef=1.0) -> Polynomial:
    alpha = tuple(alpha)
    return Polynomial(len(alpha), {alpha: coef})


def evaluate(phi, X):
    return phi(X)


def gradient(phi, X) -> np.ndarray:
    """Gradient at points ``X`` of shape ``(m, n)``; returns ``(m, n)``."""
    X = np.asarray(X, dtype=float).reshape(-1, phi.n)
    if isinstance(phi, Polynomial):
        return np.stack([d(X) for d in phi.gradient()], axis=1)
    return phi.grad(X)


def hessian(phi, X) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1, phi.n)
    if isinstance(phi, Polynomial):
        H = phi.hessian()
        return np.stack([np.stack([H[i][j](X) for j in range(phi.n)], axis=1)
                         for i in range(phi.n)], axis=1)
    return phi.hess(X)
