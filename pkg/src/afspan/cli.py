"""JSON-configured experiment front end.

Each subcommand reads one JSON config document, runs the corresponding
library routine, and writes machine-readable CSV/JSON artifacts into the
output directory. Identical config and seed produce byte-identical outputs.
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import approx, ballmap, cellmeasure, l2core
from .approx import ZeroActivationError
from .ballmap import RationalizationError, RatioMismatchError
from .l2core import DEFAULT_GRID, GridFunction, GridSpec
from .cellmeasure import BudgetExceededError, DiscreteSet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_BAND_RE = re.compile(r"^bandlimited\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)$")


class ConfigError(Exception):
    """Invalid or missing configuration; the message names the field."""


def _fmt(x: float) -> str:
    """Shortest round-trip float text, stable across runs."""
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, int) else _fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _require(config: dict, field: str):
    if field not in config:
        raise ConfigError(f"missing required field '{field}'")
    return config[field]


def _grid_from_config(config: dict) -> GridSpec:
    raw = config.get("grid")
    if raw is None:
        return DEFAULT_GRID
    try:
        return GridSpec(float(raw["start"]), float(raw["step"]), int(raw["count"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid field 'grid': {exc}") from exc


def _resolve_function(spec, grid: GridSpec, field: str) -> GridFunction:
    """Builtin name, bandlimited(lo,hi), or a grid-function file path."""
    if not isinstance(spec, str) or not spec:
        raise ConfigError(f"field '{field}' must be a builtin name or file path")
    name = spec.strip()
    if name == "gaussian":
        return l2core.gaussian(grid)
    if name == "hat":
        return l2core.hat_from_relu(grid)
    if name == "indicator":
        return l2core.indicator(0.0, 1.0, grid)
    if name == "zero":
        return GridFunction(grid.start, grid.step, np.zeros(grid.count))
    if name == "relu":
        raise ConfigError(
            f"field '{field}': 'relu' is not square-integrable; use 'hat' for "
            "its second-difference composite"
        )
    m = _BAND_RE.match(name)
    if m:
        try:
            lo, hi = float(m.group(1)), float(m.group(2))
            return l2core.bandlimited(lo, hi, grid)
        except ValueError as exc:
            raise ConfigError(f"field '{field}': {exc}") from exc
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"field '{field}': no builtin or file named '{name}'")
    try:
        return l2core.load_grid_function(path)
    except ValueError as exc:
        raise ConfigError(f"field '{field}': {exc}") from exc


def _reject_zero(f: GridFunction, field: str) -> GridFunction:
    if l2core.l2_norm(f) <= 1e-12:
        raise ConfigError(f"field '{field}': activation is the zero function")
    return f


def _dictionary_config(config: dict, target: GridFunction) -> approx.DictionaryConfig:
    default = approx.default_dictionary_config(target)
    alphas = config.get("alpha_grid")
    thetas = config.get("theta_grid")
    try:
        return approx.DictionaryConfig(
            tuple(float(a) for a in alphas) if alphas is not None else default.alpha_grid,
            tuple(float(t) for t in thetas) if thetas is not None else default.theta_grid,
            bool(config.get("normalize_atoms", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid dictionary grids: {exc}") from exc


def _positive_int(config: dict, field: str, minimum: int = 1) -> int:
    value = _require(config, field)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"field '{field}' must be an integer >= {minimum}")
    return value


def _checkpoints(config: dict, max_atoms: int) -> list[int]:
    raw = config.get("checkpoints")
    if raw is None:
        points, n = [], 1
        while n < max_atoms:
            points.append(n)
            n *= 2
        return points + [max_atoms]
    try:
        points = [int(c) for c in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid field 'checkpoints': {exc}") from exc
    if not points or points[0] < 1 or any(b <= a for a, b in zip(points, points[1:])):
        raise ConfigError("field 'checkpoints' must be strictly increasing positive integers")
    if points[-1] > max_atoms:
        raise ConfigError("field 'checkpoints' may not exceed 'max_atoms'")
    return points


def _result_payload(result: approx.ApproximationResult) -> dict:
    return {
        "atoms": [[a.alpha, a.theta] for a in result.atoms],
        "coefficients": result.coefficients,
        "residual_history": result.residual_history,
        "target_norm": result.target_norm,
        "gram_fallback": result.gram_fallback,
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_approximate(config: dict, outdir: Path, seed: int) -> int:
    grid = _grid_from_config(config)
    activation = _reject_zero(_resolve_function(_require(config, "activation"), grid, "activation"), "activation")
    target = _resolve_function(_require(config, "target"), grid, "target")
    max_atoms = _positive_int(config, "max_atoms")
    checkpoints = _checkpoints(config, max_atoms)
    cfg = _dictionary_config(config, target)
    ridge = config.get("ridge")
    rows = approx.convergence_table(
        activation,
        target,
        cfg,
        checkpoints,
        int(config.get("reproject_every", 8)),
        ridge=float(ridge) if ridge is not None else None,
    )
    result = approx.greedy_fit(
        activation, target, cfg, max_atoms, int(config.get("reproject_every", 8)),
        ridge=float(ridge) if ridge is not None else None,
    )
    _write_csv(outdir / "approximate.csv", ["N", "residual", "relative_residual"], [list(r) for r in rows])
    _write_json(outdir / "approximate.json", _result_payload(result))
    return EXIT_OK


def cmd_baseline_compare(config: dict, outdir: Path, seed: int) -> int:
    grid = _grid_from_config(config)
    activation = _reject_zero(_resolve_function(_require(config, "activation"), grid, "activation"), "activation")
    target = _resolve_function(_require(config, "target"), grid, "target")
    max_atoms = _positive_int(config, "max_atoms")
    checkpoints = _checkpoints(config, max_atoms)
    cfg = _dictionary_config(config, target)
    tau = config.get("tau")
    if tau is None:
        spectrum = l2core.fourier_transform(activation)
        tau = spectrum.zero_threshold
    bound = approx.spectral_lower_bound(activation, target, float(tau))
    affine = approx.convergence_table(activation, target, cfg, checkpoints)
    baseline = approx.convergence_table(
        activation,
        target,
        approx.DictionaryConfig((1.0,), cfg.theta_grid, cfg.normalize_atoms),
        checkpoints,
    )
    rows = [
        [n, brow[1], arow[1], bound]
        for (n, *_), brow, arow in zip(affine, baseline, affine)
    ]
    _write_csv(
        outdir / "baseline_compare.csv",
        ["N", "translation_residual", "affine_residual", "spectral_lower_bound"],
        rows,
    )
    _write_json(
        outdir / "baseline_compare.json",
        {
            "spectral_lower_bound": bound,
            "tau": float(tau),
            "target_norm": l2core.l2_norm(target),
        },
    )
    return EXIT_OK


def cmd_diagnose(config: dict, outdir: Path, seed: int) -> int:
    grid = _grid_from_config(config)
    activation = _reject_zero(_resolve_function(_require(config, "activation"), grid, "activation"), "activation")
    threshold = config.get("zero_threshold")
    diag = l2core.fourier_transform(
        activation, float(threshold) if threshold is not None else None
    )
    window = config.get("window")
    if window is None:
        # Default to the hull of the numerically significant band; outside it
        # double precision cannot distinguish small magnitudes from true zeros.
        alive = np.flatnonzero(diag.magnitudes >= diag.zero_threshold)
        freqs = diag.freqs()
        window = [float(freqs[alive[0]]), float(freqs[alive[-1]])] if alive.size else [
            float(freqs[0]),
            float(freqs[-1]),
        ]
    try:
        lo, hi = float(window[0]), float(window[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"invalid field 'window': {exc}") from exc
    fraction = l2core.zero_set_fraction(diag, (lo, hi))
    _write_json(
        outdir / "diagnose.json",
        {
            "freq_start": diag.freq_start,
            "freq_step": diag.freq_step,
            "zero_threshold": diag.zero_threshold,
            "zero_fraction": fraction,
            "zero_fraction_full_range": diag.zero_fraction,
            "window": [lo, hi],
            "magnitudes": [float(m) for m in diag.magnitudes],
        },
    )
    return EXIT_OK


def cmd_ballmap(config: dict, outdir: Path, seed: int) -> int:
    a = np.asarray(_require(config, "a"), dtype=np.float64)
    b = np.asarray(_require(config, "b"), dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ConfigError("fields 'a' and 'b' must be equal-length vectors")
    r_a = float(_require(config, "r_a"))
    if r_a <= 0:
        raise ConfigError("field 'r_a' must be positive")
    norm_a, norm_b = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if norm_a <= 1e-12 or norm_b <= 1e-12:
        raise ConfigError("fields 'a' and 'b' must be nonzero vectors")
    r_b = float(config.get("r_b", r_a * norm_b / norm_a))
    epsilon = float(config.get("epsilon", 0.1))
    if epsilon <= 0:
        raise ConfigError("field 'epsilon' must be positive")
    mc_samples = int(config.get("mc_samples", 10 ** 6))
    if mc_samples < 10 ** 4:
        raise ConfigError("field 'mc_samples' must be at least 10000")
    report = ballmap.run_ball_map_pipeline(a, b, r_a, r_b, epsilon, mc_samples, seed=seed)
    _write_json(
        outdir / "ballmap.json",
        {
            "N_matrix": [[float(x) for x in row] for row in report.N_matrix],
            "M": report.M.entry_strings(),
            "det_M": f"{report.M.det().numerator}/{report.M.det().denominator}",
            "delta": report.delta,
            "op_distance": report.op_distance,
            "vol_image": report.vol_image,
            "vol_target": report.vol_target,
            "mc_intersection": report.mc_intersection,
            "mc_stderr": report.mc_stderr,
            "cond_i_ok": report.cond_i_ok,
            "cond_ii_ok": report.cond_ii_ok,
        },
    )
    return EXIT_OK


def _intervals_to_set(box, cell: float, intervals, exclude) -> DiscreteSet:
    def predicate(points):
        x = points[:, 0]
        keep = np.zeros(x.shape[0], dtype=bool)
        for lo, hi in intervals:
            keep |= (x >= lo) & (x <= hi)
        for lo, hi in exclude:
            keep &= ~((x > lo) & (x < hi))
        return keep

    return DiscreteSet.from_predicate(box, cell, predicate)


def cmd_orbit(config: dict, outdir: Path, seed: int) -> int:
    if int(config.get("n", 1)) != 1:
        raise ConfigError("field 'n': only the 1-d orbit experiment is wired to the CLI")
    cell = float(config.get("cell", 1.0 / 512))
    box_raw = config.get("box", [-4.0, 4.0])
    try:
        box = ((float(box_raw[0]), float(box_raw[1])),)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"invalid field 'box': {exc}") from exc
    set_intervals = config.get("set_intervals", [[1.0, 2.0]])
    exclude = config.get("exclude_intervals", [])
    heights = config.get("heights", [1, 2, 4, 8, 16, 32, 64])
    try:
        heights = [int(h) for h in heights]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid field 'heights': {exc}") from exc
    if not heights or any(h < 1 for h in heights) or any(
        b <= a for a, b in zip(heights, heights[1:])
    ):
        raise ConfigError("field 'heights' must be strictly increasing positive integers")
    try:
        A = _intervals_to_set(box, cell, [tuple(map(float, iv)) for iv in set_intervals], [])
        reference = _intervals_to_set(
            box, cell, [box[0]], [tuple(map(float, iv)) for iv in exclude]
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid orbit set definition: {exc}") from exc
    if A.cell_count == 0:
        raise ConfigError("field 'set_intervals': the set has zero measure")
    rows = [[h, cellmeasure.orbit_coverage(A, h, reference)] for h in heights]
    _write_csv(outdir / "orbit.csv", ["height", "fraction"], rows)
    return EXIT_OK


def cmd_lemma_check(config: dict, outdir: Path, seed: int) -> int:
    trials = _positive_int(config, "trials")
    k_min = int(config.get("k_min", 3))
    k_max = int(config.get("k_max", 6))
    if k_min < 3 or k_max < k_min:
        raise ConfigError("fields 'k_min'/'k_max' must satisfy 3 <= k_min <= k_max")
    cells = int(config.get("cells", 64))
    if cells < 1:
        raise ConfigError("field 'cells' must be positive")
    dims = config.get("dimensions", [1, 2])
    if not all(d in (1, 2) for d in dims):
        raise ConfigError("field 'dimensions' entries must be 1 or 2")
    rng = np.random.default_rng(seed)
    holds = 0
    for _ in range(trials):
        n = int(rng.choice(dims))
        k = int(rng.integers(k_min, k_max + 1))
        box = tuple(((0.0, 1.0),) * n)
        shape = (cells,) * n
        chain = [
            DiscreteSet(box, 1.0 / cells, rng.random(shape) < rng.uniform(0.05, 0.95))
            for _ in range(k)
        ]
        if cellmeasure.chain_inequality_check(chain).holds:
            holds += 1
    print(f"holds: {holds}/{trials}")
    _write_json(
        outdir / "lemma_check.json",
        {"trials": trials, "holds": holds, "all_hold": holds == trials},
    )
    return EXIT_OK if holds == trials else EXIT_NUMERIC


def cmd_selftest(config: dict, outdir: Path, seed: int) -> int:
    checks: list[tuple[str, bool, str]] = []

    hat = l2core.hat_from_relu()
    energy = l2core.inner_product(hat, hat)
    checks.append(("hat_energy", abs(energy - 2.0 / 3.0) < 1e-5, f"{energy:.9f} vs 2/3"))

    g = l2core.gaussian()
    diag = l2core.fourier_transform(g)
    freqs = diag.freqs()
    window = np.abs(freqs) <= 2.0
    exact = np.exp(-np.pi * freqs[window] ** 2)
    err = float(np.max(np.abs(diag.magnitudes[window] - exact)))
    checks.append(("gaussian_transform", err < 1e-6, f"max abs err {err:.3e}"))

    parseval = abs(l2core.spectral_energy(diag) - l2core.inner_product(g, g))
    checks.append(("plancherel", parseval < 1e-9, f"gap {parseval:.3e}"))

    box = ((0.0, 1.0),)
    rng = np.random.default_rng(seed)
    chain_ok = all(
        cellmeasure.chain_inequality_check(
            [DiscreteSet(box, 1.0 / 64, rng.random(64) < 0.5) for _ in range(3)]
        ).holds
        for _ in range(25)
    )
    checks.append(("chain_inequality", chain_ok, "25 random triples"))

    report = ballmap.run_ball_map_pipeline(
        np.array([1.0, 0.0]), np.array([0.0, 2.0]), 0.5, 1.0, 0.1, 10 ** 4, seed=seed
    )
    checks.append(
        (
            "ball_map_pipeline",
            report.cond_i_ok and report.cond_ii_ok and report.op_distance < report.delta,
            f"op distance {report.op_distance:.3e} < delta {report.delta:.3e}",
        )
    )

    all_ok = True
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        all_ok = all_ok and ok
    _write_json(
        outdir / "selftest.json",
        {name: {"ok": ok, "detail": detail} for name, ok, detail in checks},
    )
    return EXIT_OK if all_ok else EXIT_NUMERIC


COMMANDS = {
    "approximate": (cmd_approximate, True),
    "baseline-compare": (cmd_baseline_compare, True),
    "diagnose": (cmd_diagnose, True),
    "ballmap": (cmd_ballmap, True),
    "orbit": (cmd_orbit, True),
    "lemma-check": (cmd_lemma_check, True),
    "selftest": (cmd_selftest, False),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afspan",
        description="Run affine-span approximation and measure-theory experiments "
        "from a JSON config.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config document")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument(
            "--dry-run",
            action="store_true",
            help="validate the config without running the experiment",
        )
    return parser


def _validate(command: str, config: dict, outdir: Path, seed: int) -> None:
    """Config validation pass shared by --dry-run and the real run."""
    fn, _ = COMMANDS[command]
    if command == "approximate" or command == "baseline-compare":
        grid = _grid_from_config(config)
        _reject_zero(_resolve_function(_require(config, "activation"), grid, "activation"), "activation")
        _resolve_function(_require(config, "target"), grid, "target")
        max_atoms = _positive_int(config, "max_atoms")
        _checkpoints(config, max_atoms)
    elif command == "diagnose":
        grid = _grid_from_config(config)
        _reject_zero(_resolve_function(_require(config, "activation"), grid, "activation"), "activation")
    elif command == "ballmap":
        a = np.asarray(_require(config, "a"), dtype=np.float64)
        b = np.asarray(_require(config, "b"), dtype=np.float64)
        if a.ndim != 1 or a.shape != b.shape:
            raise ConfigError("fields 'a' and 'b' must be equal-length vectors")
        if float(_require(config, "r_a")) <= 0:
            raise ConfigError("field 'r_a' must be positive")
    elif command == "lemma-check":
        _positive_int(config, "trials")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn, needs_config = COMMANDS[args.command]

    config: dict = {}
    if args.config is not None:
        if not args.config.exists():
            print(f"config error: no such config file: {args.config}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            config = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            print(f"config error: malformed JSON: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(config, dict):
            print("config error: the config document must be a JSON object", file=sys.stderr)
            return EXIT_CONFIG
    elif needs_config:
        print(f"config error: '{args.command}' requires --config", file=sys.stderr)
        return EXIT_CONFIG

    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    if seed < 0 or seed >= 2 ** 64:
        print("config error: field 'seed' must fit an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    outdir = args.out

    try:
        _validate(args.command, config, outdir, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        print("config ok")
        return EXIT_OK

    outdir.mkdir(parents=True, exist_ok=True)
    try:
        return fn(config, outdir, seed)
    except (ConfigError, ZeroActivationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceededError, RatioMismatchError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RationalizationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
