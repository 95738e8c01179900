"""Measure theory on bounded cell grids, exact by construction.

A :class:`DiscreteSet` is a bit mask over the cells of a bounded box; its
measure is the cell count times the cell volume, so set algebra and the chain
intersection inequality reduce to exact integer arithmetic. Membership of a
continuum point is decided by which cell contains it, and rasterization of a
continuum set marks the cells whose centers it contains.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np
import scipy.signal

from .rational import RationalMatrix, exact_det

__all__ = [
    "BudgetExceededError",
    "DiscreteSet",
    "DensityProfile",
    "ChainReport",
    "measure",
    "chain_inequality_check",
    "density_profile",
    "find_density_point",
    "enumerate_rational_matrices",
    "orbit_coverage",
]

# Density threshold used by the continuum contradiction argument; exposed for
# experiments that profile near-density-one points.
DENSITY_EPSILON = 0.1

# Enumeration refuses to stream more candidate matrices than this.
ENUMERATION_CAP = 10 ** 7


class BudgetExceededError(ValueError):
    """The requested matrix enumeration exceeds the streaming cap."""


@dataclass(frozen=True)
class DiscreteSet:
    """Bounded grid-cell set with exact cell-count measure.

    ``box`` holds per-axis (start, end) with extent an integer multiple of
    ``cell``; ``mask`` marks the occupied cells (row-major, axis 0 first).
    Dimensions 1 and 2 are supported.
    """

    box: tuple[tuple[float, float], ...]
    cell: float
    mask: np.ndarray

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        n = len(box)
        if n not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        if self.cell <= 0 or not np.isfinite(self.cell):
            raise ValueError("cell size must be positive")
        shape = []
        for lo, hi in box:
            if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
                raise ValueError("box sides must be finite nonempty intervals")
            m = (hi - lo) / self.cell
            if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
                raise ValueError("box extent must be an integer number of cells")
            shape.append(int(round(m)))
        mask = np.array(self.mask, dtype=bool, copy=True)
        if mask.shape != tuple(shape):
            raise ValueError(f"mask shape {mask.shape} does not match box {tuple(shape)}")
        mask.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "mask", mask)

    @property
    def n(self) -> int:
        return len(self.box)

    @property
    def cell_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def axis_centers(self, axis: int) -> np.ndarray:
        lo, _ = self.box[axis]
        return lo + self.cell * (np.arange(self.mask.shape[axis]) + 0.5)

    def centers(self) -> np.ndarray:
        """Cell centers as an (m, n) array in row-major cell order."""
        axes = [self.axis_centers(d) for d in range(self.n)]
        if self.n == 1:
            return axes[0][:, None]
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    # -- constructors -------------------------------------------------------

    @classmethod
    def empty(cls, box, cell: float) -> "DiscreteSet":
        return cls(tuple(box), cell, np.zeros(_shape_for(box, cell), dtype=bool))

    @classmethod
    def full(cls, box, cell: float) -> "DiscreteSet":
        return cls(tuple(box), cell, np.ones(_shape_for(box, cell), dtype=bool))

    @classmethod
    def from_predicate(cls, box, cell: float, predicate) -> "DiscreteSet":
        """Rasterize a continuum set: keep cells whose center satisfies it."""
        empty = cls.empty(box, cell)
        flags = np.asarray(predicate(empty.centers()), dtype=bool)
        return cls(empty.box, cell, flags.reshape(empty.mask.shape))

    # -- algebra -------------------------------------------------------------

    def _check_compatible(self, other: "DiscreteSet") -> None:
        if self.box != other.box or self.cell != other.cell:
            raise ValueError("sets live on different grids")

    def union(self, other: "DiscreteSet") -> "DiscreteSet":
        self._check_compatible(other)
        return DiscreteSet(self.box, self.cell, self.mask | other.mask)

    def intersection(self, other: "DiscreteSet") -> "DiscreteSet":
        self._check_compatible(other)
        return DiscreteSet(self.box, self.cell, self.mask & other.mask)

    def difference(self, other: "DiscreteSet") -> "DiscreteSet":
        self._check_compatible(other)
        return DiscreteSet(self.box, self.cell, self.mask & ~other.mask)

    def complement(self) -> "DiscreteSet":
        """Complement within the bounding box (the grid's whole universe)."""
        return DiscreteSet(self.box, self.cell, ~self.mask)

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        """Exact cell-containment test for an (m, n) array of points."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        inside = np.ones(points.shape[0], dtype=bool)
        idx = []
        for d in range(self.n):
            lo, _ = self.box[d]
            k = np.floor((points[:, d] - lo) / self.cell).astype(np.int64)
            inside &= (k >= 0) & (k < self.mask.shape[d])
            idx.append(np.clip(k, 0, self.mask.shape[d] - 1))
        hit = self.mask[tuple(idx)] if self.n > 1 else self.mask[idx[0]]
        return inside & hit


def _shape_for(box, cell: float) -> tuple[int, ...]:
    shape = []
    for lo, hi in box:
        m = (float(hi) - float(lo)) / cell
        if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
            raise ValueError("box extent must be an integer number of cells")
        shape.append(int(round(m)))
    return tuple(shape)


def measure(S: DiscreteSet) -> float:
    """Exact measure: occupied cell count times cell volume."""
    return S.cell_count * S.cell ** S.n


@dataclass(frozen=True)
class ChainReport:
    lhs: float
    rhs: float
    holds: bool
    lhs_cells: int
    rhs_cells: int


def chain_inequality_check(sets: list[DiscreteSet]) -> ChainReport:
    """Check ``m(M1 & Mk) >= sum_i m(Mi & Mi+1) - sum inner m(Mi)`` exactly.

    All sets must share one grid and the chain must have length at least 3.
    The comparison is on integer cell counts, so the reported ``holds`` is
    exact; a False value would indicate an implementation bug, not a
    counterexample, since the inequality is a theorem for any measure.
    """
    k = len(sets)
    if k < 3:
        raise ValueError("need a chain of at least 3 sets")
    first = sets[0]
    for s in sets[1:]:
        first._check_compatible(s)
    lhs_cells = int(np.count_nonzero(sets[0].mask & sets[-1].mask))
    adjacent = sum(
        int(np.count_nonzero(sets[i].mask & sets[i + 1].mask)) for i in range(k - 1)
    )
    inner = sum(int(np.count_nonzero(sets[i].mask)) for i in range(1, k - 1))
    rhs_cells = adjacent - inner
    scale = first.cell ** first.n
    return ChainReport(
        lhs=lhs_cells * scale,
        rhs=rhs_cells * scale,
        holds=lhs_cells >= rhs_cells,
        lhs_cells=lhs_cells,
        rhs_cells=rhs_cells,
    )


@dataclass(frozen=True)
class DensityProfile:
    """Relative measure of a set in shrinking balls around one point."""

    point: tuple[float, ...]
    radii: tuple[float, ...]
    ratios: tuple[float, ...]
    clipped: bool


def density_profile(
    S: DiscreteSet, x, r_min: float, r_max: float, steps: int = 16
) -> DensityProfile:
    """Ratios ``m(B_r(x) & S) / m(B_r(x))`` on the cell grid, r decreasing.

    Both numerator and denominator count cells whose centers lie in the open
    ball, so each ratio is exact on the grid. Radii are geometrically spaced
    from ``r_max`` down to ``r_min``. ``clipped`` flags balls reaching outside
    the box.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != S.n:
        raise ValueError("point dimension must match the set")
    for (lo, hi), xi in zip(S.box, x):
        if not (lo <= xi <= hi):
            raise ValueError("point must lie inside the box")
    if not (0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    if steps < 1:
        raise ValueError("steps must be positive")
    radii = np.geomspace(r_max, r_min, steps)
    centers = S.centers()
    dist = np.linalg.norm(centers - x, axis=1)
    flat = S.mask.ravel()
    ratios = []
    for r in radii:
        inball = dist < r
        denom = int(np.count_nonzero(inball))
        num = int(np.count_nonzero(inball & flat))
        ratios.append(num / denom if denom else 0.0)
    clipped = any(
        xi - r_max < lo or xi + r_max > hi for (lo, hi), xi in zip(S.box, x)
    )
    return DensityProfile(
        point=tuple(float(v) for v in x),
        radii=tuple(float(r) for r in radii),
        ratios=tuple(ratios),
        clipped=clipped,
    )


def _ball_kernel(n: int, r: float, cell: float) -> np.ndarray:
    """Integer mask of center offsets within distance r (open ball)."""
    reach = int(np.ceil(r / cell))
    offsets = cell * np.arange(-reach, reach + 1)
    if n == 1:
        return (np.abs(offsets) < r).astype(np.int64)
    gx, gy = np.meshgrid(offsets, offsets, indexing="ij")
    return (np.hypot(gx, gy) < r).astype(np.int64)


def _count_in_balls(mask: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Exact integer count of True cells within the kernel around every cell."""
    arr = mask.astype(np.int64)
    if arr.ndim == 1:
        return np.convolve(arr, kernel, mode="same")
    return scipy.signal.convolve2d(arr, kernel, mode="same", boundary="fill")


def find_density_point(S: DiscreteSet, epsilon: float) -> tuple[tuple[float, ...], float] | None:
    """First cell center of S whose ball density reaches ``1 - epsilon``.

    Radii are scanned coarse to fine (halving from a quarter of the shortest
    box side down to twice the cell size) and cells in row-major order, so the
    result is deterministic. Returns None when no grid radius works, which can
    happen for sparse masks even though the continuum theorem guarantees a
    density point for positive-measure sets.
    """
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must be in (0, 1)")
    if S.cell_count == 0:
        return None
    shortest = min(hi - lo for lo, hi in S.box)
    r = shortest / 4.0
    radii = []
    while r >= 2.0 * S.cell:
        radii.append(r)
        r /= 2.0
    if not radii:
        radii = [2.0 * S.cell]
    for r in radii:
        kernel = _ball_kernel(S.n, r, S.cell)
        num = _count_in_balls(S.mask, kernel)
        den = _count_in_balls(np.ones_like(S.mask), kernel)
        ok = S.mask & (num >= (1.0 - epsilon) * den)
        if ok.any():
            flat_index = int(np.argmax(ok))
            idx = np.unravel_index(flat_index, S.mask.shape)
            point = tuple(
                float(S.axis_centers(d)[idx[d]]) for d in range(S.n)
            )
            return point, float(r)
    return None


def _rational_values(height: int) -> list[Fraction]:
    values = {Fraction(0)}
    for q in range(1, height + 1):
        for p in range(1, height + 1):
            f = Fraction(p, q)
            values.add(f)
            values.add(-f)
    return sorted(values)


def enumerate_rational_matrices(n: int, height: int) -> Iterator[RationalMatrix]:
    """All invertible n x n matrices of reduced rationals up to ``height``.

    Entries range over p/q with |p| <= height and 1 <= q <= height (zero
    included); matrices stream deduplicated in lexicographic order of the
    row-major entry sequence, keeping only those with nonzero exact
    determinant. Raises :class:`BudgetExceededError` when the candidate count
    exceeds the streaming cap.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if height < 1:
        raise ValueError("height must be at least 1")
    values = _rational_values(height)
    total = len(values) ** (n * n)
    if total > ENUMERATION_CAP:
        raise BudgetExceededError(
            f"{total} candidate matrices exceed the {ENUMERATION_CAP} streaming cap"
        )

    def stream() -> Iterator[RationalMatrix]:
        for combo in itertools.product(values, repeat=n * n):
            rows = [list(combo[i * n : (i + 1) * n]) for i in range(n)]
            if exact_det(rows) != 0:
                yield RationalMatrix(tuple(tuple(r) for r in rows))

    return stream()


def orbit_coverage(A: DiscreteSet, height: int, reference: DiscreteSet) -> float:
    """Fraction of the reference set covered by the images of A under the
    height-bounded rational matrix enumeration.

    A reference cell counts as covered when its center has an exact preimage
    in A under some enumerated matrix; since the matrix set only grows with
    ``height``, coverage is nondecreasing in the bound. The unbounded union
    would cover everything up to measure zero whenever A has positive measure,
    and the bounded run is the monotone truncation of that statement.
    """
    if A.n != reference.n:
        raise ValueError("A and reference must share a dimension")
    if A.cell_count == 0:
        raise ValueError("A must have positive measure")
    ref_total = reference.cell_count
    if ref_total == 0:
        raise ValueError("reference set is empty")
    centers = reference.centers()
    covered = np.zeros(centers.shape[0], dtype=bool)
    for M in enumerate_rational_matrices(A.n, height):
        pre = centers @ M.inverse().to_float().T
        covered |= A.contains_points(pre)
    hits = int(np.count_nonzero(covered & reference.mask.ravel()))
    return hits / ref_total
