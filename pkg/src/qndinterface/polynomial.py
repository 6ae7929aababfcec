"""Sparse multivariate polynomials with real coefficients.

Only what the Gaussian-polynomial calculus needs: products, affine changes
of variables, partial evaluation and centered Gaussian expectations.
"""

from __future__ import annotations

from itertools import product as _iproduct
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

Exponent = Tuple[int, ...]


class Poly:
    """Polynomial stored as ``{exponent tuple: coefficient}``.

    Instances are treated as immutable; every operation returns a new object.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Exponent, float] | None = None):
        self.nvars = int(nvars)
        clean: Dict[Exponent, float] = {}
        for exp, coeff in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars:
                raise ValueError(f"exponent {exp} does not match nvars={self.nvars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            coeff = float(coeff)
            if coeff != 0.0:
                clean[exp] = clean.get(exp, 0.0) + coeff
        self.terms = clean

    @classmethod
    def constant(cls, nvars: int, value: float = 1.0) -> "Poly":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Poly":
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): 1.0})

    @classmethod
    def affine(cls, coeffs: Sequence[float], offset: float = 0.0) -> "Poly":
        """``offset + sum_j coeffs[j] * v_j``."""
        n = len(coeffs)
        terms: Dict[Exponent, float] = {(0,) * n: offset}
        for j, a in enumerate(coeffs):
            if a != 0.0:
                exp = [0] * n
                exp[j] = 1
                terms[tuple(exp)] = float(a)
        return cls(n, terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self) -> str:
        return f"Poly(nvars={self.nvars}, terms={self.terms!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def allclose(self, other: "Poly", atol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return self.nvars == other.nvars and all(
            abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= atol for k in keys
        )

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for exp, c in other.terms.items():
            out[exp] = out.get(exp, 0.0) + c
        return Poly(self.nvars, out)

    def scale(self, factor: float) -> "Poly":
        return Poly(self.nvars, {e: c * factor for e, c in self.terms.items()})

    def __mul__(self, other: "Poly") -> "Poly":
        if self.nvars != other.nvars:
            raise ValueError("cannot multiply polynomials over different variable sets")
        out: Dict[Exponent, float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exp = tuple(a + b for a, b in zip(e1, e2))
                out[exp] = out.get(exp, 0.0) + c1 * c2
        return Poly(self.nvars, out)

    def embed(self, nvars: int, positions: Sequence[int]) -> "Poly":
        """Re-index into a larger variable set; variable ``i`` goes to ``positions[i]``."""
        out = {}
        for exp, c in self.terms.items():
            new = [0] * nvars
            for i, e in enumerate(exp):
                new[positions[i]] += e
            out[tuple(new)] = c
        return Poly(nvars, out)

    def substitute_affine(self, matrix: np.ndarray, offset: np.ndarray | None = None) -> "Poly":
        """Change variables ``v_i -> offset_i + sum_j matrix[i, j] * w_j``.

        ``matrix`` has shape ``(self.nvars, new_nvars)``.
        """
        matrix = np.asarray(matrix, dtype=float)
        nnew = matrix.shape[1]
        if offset is None:
            offset = np.zeros(self.nvars)
        forms = [Poly.affine(matrix[i], offset[i]) for i in range(self.nvars)]
        powers: Dict[Tuple[int, int], Poly] = {}

        def power(i: int, k: int) -> Poly:
            key = (i, k)
            if key not in powers:
                powers[key] = Poly.constant(nnew) if k == 0 else power(i, k - 1) * forms[i]
            return powers[key]

        out: Dict[Exponent, float] = {}
        for exp, c in self.terms.items():
            term = Poly.constant(nnew, c)
            for i, e in enumerate(exp):
                if e:
                    term = term * power(i, e)
            for e2, c2 in term.terms.items():
                out[e2] = out.get(e2, 0.0) + c2
        return Poly(nnew, out)

    def fix(self, indices: Sequence[int], values: Sequence[float]) -> "Poly":
        """Evaluate the listed variables at ``values``; the rest keep their order."""
        fixed = dict(zip(indices, values))
        keep = [i for i in range(self.nvars) if i not in fixed]
        out: Dict[Exponent, float] = {}
        for exp, c in self.terms.items():
            for i, v in fixed.items():
                if exp[i]:
                    c *= v ** exp[i]
            key = tuple(exp[i] for i in keep)
            out[key] = out.get(key, 0.0) + c
        return Poly(len(keep), out)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at ``points`` of shape ``(..., nvars)``."""
        points = np.asarray(points, dtype=float)
        result = np.zeros(points.shape[:-1])
        for exp, c in self.terms.items():
            term = np.full(points.shape[:-1], c)
            for i, e in enumerate(exp):
                if e:
                    term = term * points[..., i] ** e
            result = result + term
        return result

    def gaussian_expectation(self, k: int, cov: np.ndarray) -> "Poly":
        """Average the first ``k`` variables over a centered Gaussian with covariance ``cov``.

        Returns a polynomial in the remaining ``nvars - k`` variables.
        """
        moments = GaussianMoments(cov)
        out: Dict[Exponent, float] = {}
        for exp, c in self.terms.items():
            m = moments(exp[:k])
            if m != 0.0:
                key = exp[k:]
                out[key] = out.get(key, 0.0) + c * m
        return Poly(self.nvars - k, out)

    def to_list(self) -> list:
        return [[list(e), c] for e, c in sorted(self.terms.items())]

    @classmethod
    def from_list(cls, nvars: int, items: Iterable) -> "Poly":
        return cls(nvars, {tuple(e): c for e, c in items})


class GaussianMoments:
    """Raw moments ``E[u^alpha]`` of a centered Gaussian vector (Isserlis recursion)."""

    def __init__(self, cov: np.ndarray):
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self._cache: Dict[Exponent, float] = {(0,) * len(self.cov): 1.0}

    def __call__(self, alpha: Sequence[int]) -> float:
        alpha = tuple(alpha)
        if sum(alpha) % 2:
            return 0.0
        hit = self._cache.get(alpha)
        if hit is not None:
            return hit
        i = next(j for j, a in enumerate(alpha) if a)
        rest = list(alpha)
        rest[i] -= 1
        total = 0.0
        for j, a in enumerate(rest):
            if a and self.cov[i, j] != 0.0:
                sub = list(rest)
                sub[j] -= 1
                total += a * self.cov[i, j] * self(sub)
        self._cache[alpha] = total
        return total


def monomials(nvars: int, max_degree: int) -> list:
    """All exponent tuples of total degree at most ``max_degree``."""
    return [e for e in _iproduct(range(max_degree + 1), repeat=nvars) if sum(e) <= max_degree]
