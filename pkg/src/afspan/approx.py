"""Affine-atom dictionaries and greedy sparse fitting of square-integrable targets.

A dictionary is the set of pullbacks ``f(alpha*x - theta)`` over a finite
(alpha, theta) product grid. :func:`greedy_fit` runs matching pursuit with
periodic orthogonal reprojection; :func:`translation_only_baseline` restricts
to shifts only, whose best-case residual is bounded below by the target energy
sitting on the activation's spectral zero set (:func:`spectral_lower_bound`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .l2core import (
    AffineAtom,
    GridFunction,
    GridSpec,
    _trap_weights,
    affine_pullback,
    fourier_transform,
    l2_norm,
    nonzero_support,
    resample,
)

__all__ = [
    "ZeroActivationError",
    "DictionaryConfig",
    "ApproximationResult",
    "default_dictionary_config",
    "build_dictionary",
    "greedy_fit",
    "project_span",
    "translation_only_baseline",
    "spectral_lower_bound",
    "convergence_table",
    "reconstruct",
]

log = logging.getLogger(__name__)

# Atoms whose materialized norm falls below this are dropped from dictionaries.
ATOM_NORM_FLOOR = 1e-10
# Activations with norm at or below this are rejected as zero.
ACTIVATION_NORM_FLOOR = 1e-12


class ZeroActivationError(ValueError):
    """The activation is (numerically) the zero function, which spans nothing."""


@dataclass(frozen=True)
class DictionaryConfig:
    """Parameter grids for an affine dictionary.

    ``alpha_grid`` holds nonzero dilations (negatives allowed) and
    ``theta_grid`` holds shifts; both must be strictly increasing so the
    (alpha, theta) product contains no duplicates. With ``normalize_atoms``
    set, atom selection scores are correlation per unit atom norm.
    """

    alpha_grid: tuple[float, ...]
    theta_grid: tuple[float, ...]
    normalize_atoms: bool = True

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alpha_grid)
        thetas = tuple(float(t) for t in self.theta_grid)
        if not alphas or not thetas:
            raise ValueError("alpha_grid and theta_grid must be nonempty")
        if any(not np.isfinite(a) or abs(a) < 1e-12 for a in alphas):
            raise ValueError("alpha_grid entries must be finite and nonzero")
        if any(not np.isfinite(t) for t in thetas):
            raise ValueError("theta_grid entries must be finite")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("alpha_grid must be strictly increasing")
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise ValueError("theta_grid must be strictly increasing")
        object.__setattr__(self, "alpha_grid", alphas)
        object.__setattr__(self, "theta_grid", thetas)


@dataclass
class ApproximationResult:
    """A fitted sparse combination ``sum_i coefficients[i] * f(atoms[i])``.

    ``coefficients`` weight the raw pullbacks ``f(alpha*x - theta)`` (not the
    unit-normalized atoms). ``residual_history[i]`` is the L2 residual after
    the (i+1)-th selection, including any reprojection done at that step; it is
    nonincreasing up to 1e-12 slack.
    """

    atoms: list[AffineAtom]
    coefficients: list[float]
    residual_history: list[float]
    target_norm: float
    gram_fallback: bool = False

    def __post_init__(self):
        if not (len(self.atoms) == len(self.coefficients) == len(self.residual_history)):
            raise ValueError("atoms, coefficients and residual_history must align")
        slack = 1e-12 * max(1.0, self.target_norm)
        hist = self.residual_history
        if any(b > a + slack for a, b in zip(hist, hist[1:])):
            raise ValueError("residual_history must be nonincreasing")

    def relative_residuals(self) -> list[float]:
        if self.target_norm <= 0.0:
            return [0.0 for _ in self.residual_history]
        return [r / self.target_norm for r in self.residual_history]


def default_dictionary_config(target: GridFunction) -> DictionaryConfig:
    """Default grids: dilations log-spaced over +-[2**-4, 2**4] (33 magnitudes
    per sign) and 129 shifts spanning the target's support (step = span/128).

    Dilations must reach from coarse to fine scales for small-N fits to work;
    see the README for the documented enlargement procedure when a target needs
    scales outside this range.
    """
    support = nonzero_support(target)
    if support is None:
        lo, hi = target.grid_start, target.grid.end
    else:
        lo, hi = support
    if hi <= lo:
        lo, hi = target.grid_start, target.grid.end
    magnitudes = 2.0 ** np.linspace(-4.0, 4.0, 33)
    alphas = np.concatenate([-magnitudes[::-1], magnitudes])
    thetas = np.linspace(lo, hi, 129)
    return DictionaryConfig(tuple(alphas), tuple(thetas))


def _materialize(
    cfg: DictionaryConfig, activation: GridFunction, out_grid: GridSpec
) -> tuple[list[AffineAtom], np.ndarray, np.ndarray]:
    """Pull back every (alpha, theta) pair onto ``out_grid``.

    Returns the kept atoms, the row matrix of raw samples, and the raw
    trapezoidal norms. Atoms whose support misses ``out_grid`` (norm below
    ATOM_NORM_FLOOR) are dropped.
    """
    if l2_norm(activation) <= ACTIVATION_NORM_FLOOR:
        raise ZeroActivationError("activation must be a nonzero function")
    n_alpha, n_theta = len(cfg.alpha_grid), len(cfg.theta_grid)
    rows = np.empty((n_alpha * n_theta, out_grid.count))
    atoms: list[AffineAtom] = []
    act_x = activation.x()
    out_x = out_grid.points()
    k = 0
    for alpha in cfg.alpha_grid:
        y = alpha * out_x
        for theta in cfg.theta_grid:
            rows[k] = np.interp(y - theta, act_x, activation.samples, left=0.0, right=0.0)
            atoms.append(AffineAtom(alpha, theta))
            k += 1
    w = _trap_weights(out_grid.count, out_grid.step)
    norms = np.sqrt(np.maximum((rows * rows) @ w, 0.0))
    keep = norms >= ATOM_NORM_FLOOR
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        log.warning(
            "dropped %d of %d atoms whose support fell outside the output grid",
            dropped,
            len(atoms),
        )
        atoms = [a for a, k_ in zip(atoms, keep) if k_]
        rows = rows[keep]
        norms = norms[keep]
    return atoms, rows, norms


def build_dictionary(
    cfg: DictionaryConfig, activation: GridFunction, out_grid: GridSpec
) -> list[tuple[AffineAtom, GridFunction]]:
    """Materialize the dictionary as (atom, pullback) pairs on ``out_grid``."""
    atoms, rows, _ = _materialize(cfg, activation, out_grid)
    return [
        (atom, GridFunction(out_grid.start, out_grid.step, row))
        for atom, row in zip(atoms, rows)
    ]


def _solve_gram(G: np.ndarray, b: np.ndarray, ridge: float) -> tuple[np.ndarray, float, bool]:
    """Solve (G + ridge*I) x = b, escalating ridge on factorization failure."""
    dim = G.shape[0]
    fallback = False
    current = ridge
    for attempt in range(4):
        try:
            x = scipy.linalg.solve(G + current * np.eye(dim), b, assume_a="pos")
            if np.all(np.isfinite(x)):
                return x, current, fallback
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            pass
        current = max(current, 1e-14) * 1e3
        fallback = True
    raise ArithmeticError("Gram system could not be solved even with escalated ridge")


def greedy_fit(
    activation: GridFunction,
    target: GridFunction,
    cfg: DictionaryConfig,
    max_atoms: int,
    reproject_every: int = 8,
    *,
    ridge: float | None = None,
    stop_tol: float = 1e-12,
) -> ApproximationResult:
    """Matching pursuit over the affine dictionary with periodic reprojection.

    Each step selects the unselected atom maximizing ``|<residual, atom>|``
    (per unit norm when ``cfg.normalize_atoms``), ties broken by smallest
    (alpha index, theta index). Every ``reproject_every`` selections, and at
    termination, the coefficients of all selected atoms are re-solved by
    ridge-regularized least squares on the Gram matrix; the default ridge is
    ``1e-10 * trace(G)/dim(G)``, sized for the near-singular Gram matrices
    that coherent affine dictionaries produce. The fit stops early once the
    residual drops below ``stop_tol`` times the target norm.
    """
    if max_atoms < 1:
        raise ValueError("max_atoms must be at least 1")
    if reproject_every < 1:
        raise ValueError("reproject_every must be at least 1")
    atoms, rows, norms = _materialize(cfg, activation, target.grid)
    if not atoms:
        raise ValueError("effective dictionary is empty (all atoms dropped)")

    w = _trap_weights(target.samples.size, target.step)
    t = target.samples.astype(np.float64)
    target_norm = float(np.sqrt(max(np.dot(t * t, w), 0.0)))

    selected: list[int] = []
    coeffs: dict[int, float] = {}
    history: list[float] = []
    residual = t.copy()
    available = np.ones(len(atoms), dtype=bool)
    gram_fallback = False
    dirty = True  # coefficients not yet re-solved for the current selection

    def _solve_selected() -> tuple[np.ndarray, np.ndarray, bool]:
        sub = rows[selected] / norms[selected, None]
        G = (sub * w) @ sub.T
        b = sub @ (w * t)
        lam = ridge if ridge is not None else 1e-10 * np.trace(G) / G.shape[0]
        x, _, fb = _solve_gram(G, b, lam)
        new_residual = t - x @ sub
        return x / norms[selected], new_residual, fb

    budget = min(max_atoms, len(atoms))
    for step in range(budget):
        corr = rows @ (w * residual)
        score = np.abs(corr) / norms if cfg.normalize_atoms else np.abs(corr)
        score[~available] = -np.inf
        j = int(np.argmax(score))
        available[j] = False
        selected.append(j)
        increment = corr[j] / norms[j] ** 2
        coeffs[j] = coeffs.get(j, 0.0) + increment
        residual = residual - increment * rows[j]
        res_norm = float(np.sqrt(max(np.dot(residual * residual, w), 0.0)))
        dirty = True
        if len(selected) % reproject_every == 0 or step == budget - 1:
            solved, new_residual, fb = _solve_selected()
            gram_fallback = gram_fallback or fb
            new_norm = float(np.sqrt(max(np.dot(new_residual * new_residual, w), 0.0)))
            # Least squares can only improve on the running pursuit iterate;
            # keep the pursuit state on the (rounding-level) off chance it does not.
            if new_norm <= res_norm:
                coeffs = dict(zip(selected, (float(c) for c in solved)))
                residual, res_norm = new_residual, new_norm
                dirty = False
        history.append(res_norm)
        if res_norm <= stop_tol * target_norm:
            break

    if dirty:
        solved, new_residual, fb = _solve_selected()
        gram_fallback = gram_fallback or fb
        new_norm = float(np.sqrt(max(np.dot(new_residual * new_residual, w), 0.0)))
        if new_norm <= history[-1]:
            coeffs = dict(zip(selected, (float(c) for c in solved)))
            history[-1] = new_norm

    return ApproximationResult(
        atoms=[atoms[j] for j in selected],
        coefficients=[coeffs[j] for j in selected],
        residual_history=history,
        target_norm=target_norm,
        gram_fallback=gram_fallback,
    )


def project_span(
    atoms: list[GridFunction], target: GridFunction, ridge: float = 0.0
) -> tuple[np.ndarray, float]:
    """Least-squares projection of ``target`` onto the span of ``atoms``.

    Solves ``(G + ridge*I) lambda = b`` with the trapezoidal Gram matrix by a
    symmetric positive-semidefinite factorization and returns the coefficients
    together with the actual residual norm.
    """
    if not atoms:
        raise ValueError("atoms must be nonempty")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    rows = np.stack([resample(a, target.grid).samples for a in atoms])
    w = _trap_weights(target.samples.size, target.step)
    norms2 = (rows * rows) @ w
    if np.all(norms2 <= ACTIVATION_NORM_FLOOR ** 2):
        raise ValueError("all atoms are numerically zero")
    G = (rows * w) @ rows.T
    b = rows @ (w * target.samples)
    coeffs, _, _ = _solve_gram(G, b, ridge)
    residual = target.samples - coeffs @ rows
    return coeffs, float(np.sqrt(max(np.dot(residual * residual, w), 0.0)))


def translation_only_baseline(
    activation: GridFunction,
    target: GridFunction,
    theta_grid,
    max_atoms: int,
    reproject_every: int = 8,
    **kwargs,
) -> ApproximationResult:
    """Greedy fit restricted to pure shifts (alpha fixed to 1).

    This is the classical regime where approximation power is governed by the
    activation's spectral zero set; compare with :func:`spectral_lower_bound`.
    """
    cfg = DictionaryConfig((1.0,), tuple(theta_grid))
    return greedy_fit(activation, target, cfg, max_atoms, reproject_every, **kwargs)


def spectral_lower_bound(activation: GridFunction, target: GridFunction, tau: float) -> float:
    """Target energy on the activation's numerical spectral zero set.

    Let E be the frequency bins where the activation's transform magnitude is
    below ``tau``. Shifts only modulate phases, so no combination of translates
    can supply energy on E; by Plancherel the returned value lower-bounds every
    translation-span residual for this target.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if target.grid != activation.grid:
        target = resample(target, activation.grid)
    act = fourier_transform(activation)
    tgt = fourier_transform(target)
    dead = act.magnitudes < tau
    energy = float(np.sum(tgt.magnitudes[dead] ** 2) * tgt.freq_step)
    return float(np.sqrt(max(energy, 0.0)))


def convergence_table(
    activation: GridFunction,
    target: GridFunction,
    cfg: DictionaryConfig,
    checkpoints,
    reproject_every: int = 8,
    **kwargs,
) -> list[tuple[int, float, float]]:
    """Residuals of one greedy fit sampled at the given atom counts.

    Returns rows ``(N, residual, relative_residual)``. ``checkpoints`` must be
    strictly increasing positive integers; the fit runs once to the largest.
    """
    checkpoints = [int(c) for c in checkpoints]
    if not checkpoints:
        raise ValueError("checkpoints must be nonempty")
    if checkpoints[0] < 1 or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing and positive")
    result = greedy_fit(
        activation, target, cfg, checkpoints[-1], reproject_every, **kwargs
    )
    hist = result.residual_history
    rows = []
    for n in checkpoints:
        res = hist[min(n, len(hist)) - 1]
        rel = res / result.target_norm if result.target_norm > 0 else 0.0
        rows.append((n, float(res), float(rel)))
    return rows


def reconstruct(result: ApproximationResult, activation: GridFunction, grid: GridSpec) -> GridFunction:
    """Materialize the fitted combination ``sum_i lambda_i f(alpha_i x - theta_i)``."""
    acc = np.zeros(grid.count)
    for lam, atom in zip(result.coefficients, result.atoms):
        acc += lam * affine_pullback(activation, atom, grid).samples
    return GridFunction(grid.start, grid.step, acc)
