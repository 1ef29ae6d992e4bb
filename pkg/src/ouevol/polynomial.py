"""Sparse multivariate polynomials with exact Gaussian moment calculus."""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from numbers import Number

import numpy as np

__all__ = ["Polynomial", "multi_indices", "gaussian_moments"]


@lru_cache(maxsize=None)
def multi_indices(n: int, max_degree: int) -> tuple:
    """All exponent tuples of total degree <= ``max_degree``, graded order."""
    out = []
    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    # combinations_with_replacement yields each multi-index once per degree
    return tuple(out)


def gaussian_moments(mean, cov, max_degree: int) -> dict:
    """Raw moments ``E[y^alpha]`` of ``N(mean, cov)`` for ``|alpha| <= max_degree``.

    Uses ``E[y_i y^a] = m_i E[y^a] + sum_j S_ij a_j E[y^(a - e_j)]``.
    """
    mean = np.asarray(mean)
    cov = np.asarray(cov)
    n = len(mean)
    mom = {(0,) * n: 1.0}
    for alpha in multi_indices(n, max_degree)[1:]:
        i = next(k for k, a in enumerate(alpha) if a > 0)
        base = list(alpha)
        base[i] -= 1
        base = tuple(base)
        val = mean[i] * mom[base]
        for j in range(n):
            if base[j]:
                lower = list(base)
                lower[j] -= 1
                val = val + cov[i, j] * base[j] * mom[tuple(lower)]
        mom[alpha] = val
    return mom


def _binom_multi(alpha, beta) -> int:
    out = 1
    for a, b in zip(alpha, beta):
        out *= math.comb(a, b)
    return out


class Polynomial:
    """Polynomial in ``n`` variables as a map exponent-tuple -> coefficient.

    Coefficients may be complex.  Exact zero coefficients are dropped.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms=None):
        self.n = int(n)
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n or min(alpha, default=0) < 0:
                raise ValueError(f"bad exponent {alpha} for n={self.n}")
            if c != 0:
                clean[alpha] = clean.get(alpha, 0) + c
        self.terms = {a: c for a, c in clean.items() if c != 0}

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c, n: int) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, i: int, n: int) -> "Polynomial":
        alpha = [0] * n
        alpha[i] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def linear(cls, coeffs, const=0.0) -> "Polynomial":
        """``<coeffs, x> + const`` (bilinear, no conjugation)."""
        coeffs = np.asarray(coeffs)
        n = len(coeffs)
        terms = {(0,) * n: const}
        for i, c in enumerate(coeffs):
            alpha = [0] * n
            alpha[i] = 1
            terms[tuple(alpha)] = c.item() if hasattr(c, "item") else c
        return cls(n, terms)

    # -- basic properties ---------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    @property
    def is_real(self) -> bool:
        return all(np.isreal(c) for c in self.terms.values())

    def coefficient(self, alpha) -> complex:
        return self.terms.get(tuple(alpha), 0.0)

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for a, c in sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0])):
            mono = "*".join(f"x{i}^{e}" if e > 1 else f"x{i}"
                            for i, e in enumerate(a) if e)
            parts.append(f"{c:.6g}" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"

    # -- algebra ------------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return other
        if isinstance(other, Number) or np.isscalar(other):
            return Polynomial.constant(other, self.n)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0) + c
        return Polynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number) or np.isscalar(other):
            return Polynomial(self.n, {a: c * other for a, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict = {}
        for a, c in self.terms.items():
            for b, d in other.terms.items():
                k = tuple(x + y for x, y in zip(a, b))
                terms[k] = terms.get(k, 0) + c * d
        return Polynomial(self.n, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Polynomial.constant(1.0, self.n)
        for _ in range(int(k)):
            out = out * self
        return out

    def conj(self) -> "Polynomial":
        return Polynomial(self.n, {a: np.conj(c) for a, c in self.terms.items()})

    @property
    def real(self) -> "Polynomial":
        return Polynomial(self.n, {a: float(np.real(c)) for a, c in self.terms.items()})

    @property
    def imag(self) -> "Polynomial":
        return Polynomial(self.n, {a: float(np.imag(c)) for a, c in self.terms.items()})

    def max_abs_diff(self, other: "Polynomial") -> float:
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.coefficient(k) - other.coefficient(k)) for k in keys),
                   default=0.0)

    # -- calculus -----------------------------------------------------------
    def derivative(self, i: int, order: int = 1) -> "Polynomial":
        terms = {}
        for a, c in self.terms.items():
            if a[i] >= order:
                b = list(a)
                b[i] -= order
                terms[tuple(b)] = c * math.perm(a[i], order)
        return Polynomial(self.n, terms)

    def gradient(self) -> list:
        return [self.derivative(i) for i in range(self.n)]

    def hessian(self) -> list:
        grads = self.gradient()
        return [[grads[i].derivative(j) for j in range(self.n)] for i in range(self.n)]

    # -- evaluation ---------------------------------------------------------
    def __call__(self, X) -> np.ndarray:
        """Evaluate at points ``X`` of shape ``(m, n)`` (or a single point)."""
        X = np.asarray(X)
        single = X.ndim <= 1
        X = X.reshape(-1, self.n)
        deg = self.degree
        powers = [np.ones_like(X, dtype=float if np.isrealobj(X) else complex)]
        for _ in range(deg):
            powers.append(powers[-1] * X)
        dtype = complex if (not self.is_real or np.iscomplexobj(X)) else float
        out = np.zeros(len(X), dtype=dtype)
        for a, c in self.terms.items():
            mono = np.ones(len(X), dtype=powers[0].dtype)
            for i, e in enumerate(a):
                if e:
                    mono = mono * powers[e][:, i]
            out = out + (c * mono if dtype is complex else np.real(c) * mono)
        return out[0] if single else out

    # -- Gaussian calculus --------------------------------------------------
    def expectation(self, mean, cov):
        """``E[p(y)]`` for ``y ~ N(mean, cov)``, exact."""
        mom = gaussian_moments(mean, cov, self.degree)
        total = 0.0
        for a, c in self.terms.items():
            total = total + c * mom[a]
        return total

    def gaussian_smooth(self, cov) -> "Polynomial":
        """``w -> E[p(w + xi)]`` with ``xi ~ N(0, cov)``: a polynomial of no higher degree."""
        mom = gaussian_moments(np.zeros(self.n), cov, self.degree)
        terms: dict = {}
        for a, c in self.terms.items():
            for b in itertools.product(*(range(e + 1) for e in a)):
                m = mom[b]
                if m == 0:
                    continue
                k = tuple(x - y for x, y in zip(a, b))
                terms[k] = terms.get(k, 0) + c * _binom_multi(a, b) * m
        return Polynomial(self.n, terms)

    def compose_affine(self, U, g) -> "Polynomial":
        """``x -> p(U x + g)``; ``U`` may be rectangular (m_out = self.n rows)."""
        U = np.asarray(U)
        g = np.asarray(g)
        m = U.shape[1]
        forms = [Polynomial.linear(U[i], g[i].item()) for i in range(self.n)]
        cache = [[Polynomial.constant(1.0, m)] for _ in range(self.n)]
        out = Polynomial(m)
        for a, c in self.terms.items():
            term = Polynomial.constant(c, m)
            for i, e in enumerate(a):
                while len(cache[i]) <= e:
                    cache[i].append(cache[i][-1] * forms[i])
                if e:
                    term = term * cache[i][e]
            out = out + term
        return out
