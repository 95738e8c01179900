"""Exact rational matrices and best rational approximation of floats."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = ["RationalMatrix", "best_rational_within", "exact_det"]


def best_rational_within(x: float, tol: float) -> Fraction:
    """Smallest-denominator fraction within ``tol`` of ``x``.

    Walks the continued-fraction convergents of the exact binary value of
    ``x`` (each convergent is a best rational approximation) and returns the
    first one within tolerance. Inputs that are already low-denominator
    rationals are recovered exactly: the tolerance is floored at a few ulps so
    the walk stops at the intended fraction rather than chasing the float's
    own 2**53-scale representation.
    """
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    fx = Fraction(x)
    bound = max(Fraction(tol), Fraction(4 * math.ulp(abs(x))) if x else Fraction(0))

    # Convergent recurrence p_k = a_k p_{k-1} + p_{k-2}, same for q.
    p_prev, q_prev = 1, 0
    a = fx.numerator // fx.denominator
    p, q = a, 1
    frac = fx - a
    while abs(fx - Fraction(p, q)) > bound:
        if frac == 0:
            break
        frac = 1 / frac
        a = frac.numerator // frac.denominator
        frac -= a
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
    return Fraction(p, q)


def exact_det(rows: list[list[Fraction]]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    n = len(rows)
    m = [list(r) for r in rows]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for r in range(col + 1, n):
            factor = m[r][col] * inv
            if factor:
                for c in range(col, n):
                    m[r][c] -= factor * m[col][c]
    return det


@dataclass(frozen=True)
class RationalMatrix:
    """Invertible square matrix with exact rational entries.

    Construction fails for singular matrices, so every instance represents an
    element of the invertible rational matrix group of its size.
    """

    entries: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(Fraction(e) for e in row) for row in self.entries)
        n = len(rows)
        if n < 1 or any(len(row) != n for row in rows):
            raise ValueError("entries must form a square matrix")
        object.__setattr__(self, "entries", rows)
        det = exact_det([list(r) for r in rows])
        if det == 0:
            raise ValueError("matrix is singular (zero exact determinant)")
        object.__setattr__(self, "_det", det)

    @property
    def n(self) -> int:
        return len(self.entries)

    def det(self) -> Fraction:
        return self._det

    def height(self) -> int:
        """Max of |numerator| and denominator across entries."""
        return max(
            max(abs(e.numerator), e.denominator) for row in self.entries for e in row
        )

    def to_float(self) -> np.ndarray:
        return np.array([[float(e) for e in row] for row in self.entries])

    def inverse(self) -> "RationalMatrix":
        """Exact inverse by fraction Gauss-Jordan elimination."""
        n = self.n
        aug = [
            list(row) + [Fraction(int(i == j)) for j in range(n)]
            for i, row in enumerate(self.entries)
        ]
        for col in range(n):
            pivot = next(r for r in range(col, n) if aug[r][col] != 0)
            aug[col], aug[pivot] = aug[pivot], aug[col]
            inv = 1 / aug[col][col]
            aug[col] = [e * inv for e in aug[col]]
            for r in range(n):
                if r != col and aug[r][col]:
                    factor = aug[r][col]
                    aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
        return RationalMatrix(tuple(tuple(row[n:]) for row in aug))

    def apply(self, vec) -> tuple[Fraction, ...]:
        """Exact matrix-vector product for Fraction vectors."""
        vec = [Fraction(v) for v in vec]
        if len(vec) != self.n:
            raise ValueError("vector length must match matrix size")
        return tuple(sum(e * v for e, v in zip(row, vec)) for row in self.entries)

    def entry_strings(self) -> list[list[str]]:
        """Entries as exact "p/q" strings (denominator always written)."""
        return [
            [f"{e.numerator}/{e.denominator}" for e in row] for row in self.entries
        ]
