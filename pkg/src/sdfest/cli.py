"""Batch front door: JSON configs in, CSV tables out.

Exit codes: 0 success, 1 runtime/IO error, 2 usage or config error.
Everything printed to standard output is derivable from the emitted CSVs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .core import CellProbabilities, poisson_mixture_expectation
from .experiments import (
    ConfigError,
    GroupedSpec,
    KernelEstimatorSpec,
    NaturalSpec,
    ScenarioConfig,
    consistency_sweep,
    emit_csv,
    emit_sweep_csv,
    format_float,
    run_scenario,
)
from .parents import TabulatedCdf, limit_F_eval, limit_g_eval
from .sampling import SeededRng, sample_coupled, coupling_l1_bound

SCHEMA_VERSION = 1

# Defaults for optional config fields and CLI flags; mirrored in the
# committed defaults.json at the repository root.
DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "out_dir": "results",
    "eval_grid": [],
    "coupling": False,
    "quiet": False,
}

_SCENARIO_KEYS = {
    "schema_version",
    "M",
    "n",
    "parent",
    "estimators",
    "replicates",
    "seed",
    "eval_grid",
    "coupling",
}
_SWEEP_KEYS = {
    "schema_version",
    "M",
    "n",
    "parent",
    "estimators",
    "replicates",
    "seed",
    "scales",
}
_ESTIMATOR_KEYS = {
    "natural": {"type"},
    "grouped": {"type", "size", "breaks", "size_rule", "denominator"},
    "kernel": {"type", "kernel", "bandwidth", "bandwidth_rule", "denominator"},
}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _check_keys(data: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(data) - allowed)
    _require(not unknown, f"{where}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _as_int(data: dict, key: str, where: str) -> int:
    _require(key in data, f"{where}: missing required key {key!r}")
    value = data[key]
    _require(isinstance(value, int) and not isinstance(value, bool), f"{where}: {key!r} must be an integer")
    return value


def _parse_estimator(entry, index: int):
    where = f"estimators[{index}]"
    _require(isinstance(entry, dict), f"{where}: must be an object")
    kind = entry.get("type")
    _require(kind in _ESTIMATOR_KEYS, f"{where}: type must be one of {sorted(_ESTIMATOR_KEYS)}")
    _check_keys(entry, _ESTIMATOR_KEYS[kind], where)
    try:
        if kind == "natural":
            return NaturalSpec()
        if kind == "grouped":
            breaks = entry.get("breaks")
            return GroupedSpec(
                size=entry.get("size"),
                breaks=tuple(breaks) if breaks is not None else None,
                size_rule=entry.get("size_rule"),
                denominator=entry.get("denominator"),
            )
        return KernelEstimatorSpec(
            kernel=entry.get("kernel", "box"),
            bandwidth=entry.get("bandwidth"),
            bandwidth_rule=entry.get("bandwidth_rule"),
            denominator=entry.get("denominator"),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    _require(isinstance(data, dict), f"{path}: top level must be a JSON object")
    return data


def _parse_parent(data: dict, config_dir: str):
    _require("parent" in data, "missing required key 'parent'")
    parent = data["parent"]
    if isinstance(parent, str):
        _require(
            parent in ("paper-quintic", "uniform"),
            f"parent {parent!r} unknown; use 'paper-quintic', 'uniform' or "
            '{"tabulated": "file.csv"}',
        )
        return parent, None
    _require(
        isinstance(parent, dict) and set(parent) == {"tabulated"},
        "parent must be a string or {\"tabulated\": path}",
    )
    table_path = parent["tabulated"]
    if not os.path.isabs(table_path):
        table_path = os.path.join(config_dir, table_path)
    try:
        with open(table_path, "r", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            pairs = [(float(a), float(b)) for a, b in reader if a.strip()]
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read tabulated CDF {table_path}: {exc}")
    xs, gs = zip(*pairs)
    try:
        return "tabulated", TabulatedCdf(np.asarray(xs), np.asarray(gs))
    except ValueError as exc:
        raise ConfigError(f"{table_path}: {exc}") from exc


def _parse_common(data: dict, path: str, seed_override):
    version = _as_int(data, "schema_version", path)
    _require(
        version == SCHEMA_VERSION,
        f"{path}: schema_version {version} unsupported (current: {SCHEMA_VERSION})",
    )
    M = _as_int(data, "M", path)
    n = _as_int(data, "n", path)
    replicates = _as_int(data, "replicates", path)
    seed = seed_override if seed_override is not None else _as_int(data, "seed", path)
    parent, table = _parse_parent(data, os.path.dirname(os.path.abspath(path)))
    raw = data.get("estimators")
    _require(isinstance(raw, list) and raw, f"{path}: 'estimators' must be a nonempty list")
    estimators = tuple(_parse_estimator(e, i) for i, e in enumerate(raw))
    return M, n, parent, table, estimators, replicates, seed


def load_scenario_config(path: str, seed_override=None) -> ScenarioConfig:
    data = _load_json(path)
    _check_keys(data, _SCENARIO_KEYS, path)
    M, n, parent, table, estimators, replicates, seed = _parse_common(
        data, path, seed_override
    )
    eval_grid = data.get("eval_grid", DEFAULTS["eval_grid"])
    _require(
        isinstance(eval_grid, list)
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in eval_grid),
        f"{path}: 'eval_grid' must be a list of numbers",
    )
    coupling = data.get("coupling", DEFAULTS["coupling"])
    _require(isinstance(coupling, bool), f"{path}: 'coupling' must be a boolean")
    return ScenarioConfig(
        M=M,
        n=n,
        parent=parent,
        estimators=estimators,
        replicates=replicates,
        seed=seed,
        eval_grid=tuple(float(x) for x in eval_grid),
        coupling=coupling,
        table=table,
    )


def load_sweep_config(path: str, seed_override=None):
    data = _load_json(path)
    _check_keys(data, _SWEEP_KEYS, path)
    M, n, parent, table, estimators, replicates, seed = _parse_common(
        data, path, seed_override
    )
    scales = data.get("scales")
    _require(
        isinstance(scales, list)
        and scales
        and all(isinstance(s, int) and not isinstance(s, bool) for s in scales),
        f"{path}: 'scales' must be a nonempty list of integers",
    )
    base = ScenarioConfig(
        M=M,
        n=n,
        parent=parent,
        estimators=estimators,
        replicates=replicates,
        seed=seed,
        table=table,
    )
    return base, scales


def _print_scenario_table(result) -> None:
    agg = result.aggregates()
    header = f"{'estimator':<24} {'median L1->F':>14} {'mean L1->F':>14} {'stderr':>12} {'median L1->FM':>14} {'median sup->F':>14}"
    print(header)
    for label, stats in agg.items():
        print(
            f"{label:<24} {stats['median_l1_to_f']:>14.6g} {stats['mean_l1_to_f']:>14.6g} "
            f"{stats['stderr_l1_to_f']:>12.3g} {stats['median_l1_to_fm']:>14.6g} "
            f"{stats['median_sup_to_f']:>14.6g}"
        )


def _print_sweep_table(rows) -> None:
    print(f"{'scale':>6} {'M':>8} {'n':>8} {'estimator':<24} {'median L1->F':>14} {'mean':>12} {'stderr':>12}")
    for r in rows:
        print(
            f"{r.scale:>6} {r.M:>8} {r.n:>8} {r.estimator:<24} "
            f"{r.median_l1:>14.6g} {r.mean_l1:>12.6g} {r.stderr_l1:>12.3g}"
        )


def cmd_simulate(args) -> int:
    cfg = load_scenario_config(args.config, args.seed)
    result = run_scenario(cfg)
    emit_csv(result, args.out)
    if not args.quiet:
        _print_scenario_table(result)
    return 0


def cmd_sweep(args) -> int:
    base, scales = load_sweep_config(args.config, args.seed)
    rows = consistency_sweep(base, scales)
    emit_sweep_csv(rows, args.out)
    if not args.quiet:
        _print_sweep_table(rows)
    return 0


def cmd_eval(args) -> int:
    if args.limit_F is not None:
        value = limit_F_eval(args.limit_F)
    elif args.limit_g is not None:
        value = limit_g_eval(args.limit_g)
    else:
        M, n, x = int(args.mixture[0]), int(args.mixture[1]), args.mixture[2]
        if M != args.mixture[0] or n != args.mixture[1] or M < 1 or n < 1:
            raise ConfigError("--mixture needs positive integers M and n")
        # the uniform cell vector p_i = 1/M
        p = CellProbabilities.from_values(np.full(M, 1.0 / M))
        value = poisson_mixture_expectation(p, n, x)
    print(format_float(value))
    return 0


def cmd_couple_check(args) -> int:
    if args.M < 1 or args.n < 1 or args.draws < 0:
        raise ConfigError("couple-check needs M >= 1, n >= 1, draws >= 0")
    p = CellProbabilities.from_values(np.full(args.M, 1.0 / args.M))
    root = SeededRng(args.seed)
    violations = 0
    bounds = []
    for i in range(args.draws):
        try:
            check = coupling_l1_bound(sample_coupled(p, args.n, root.child("couple", i)))
            bounds.append(check.bound)
        except (AssertionError, ValueError):
            violations += 1
    if not args.quiet:
        print(f"draws={args.draws} violations={violations}")
        if bounds:
            arr = np.asarray(bounds)
            print(
                f"bound |N-n|/M: median={format_float(float(np.median(arr)))} "
                f"mean={format_float(float(arr.mean()))} max={format_float(float(arr.max()))}"
            )
    return 0 if violations == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdfest",
        description="Structural distribution function estimators: simulation and evaluation tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config path")
    common.add_argument(
        "--out", default=DEFAULTS["out_dir"], help=f"output directory (default: {DEFAULTS['out_dir']})"
    )
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout table")

    p_sim = sub.add_parser(
        "simulate", parents=[common], help="run a scenario and write replicate CSVs"
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser(
        "sweep", parents=[common], help="run a consistency sweep across scales"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_eval = sub.add_parser(
        "eval", help="evaluate the closed-form curves or the Poisson-mixture expectation"
    )
    group = p_eval.add_mutually_exclusive_group(required=True)
    group.add_argument("--limit-F", type=float, metavar="X", help="limit SDF F(X)")
    group.add_argument("--limit-g", type=float, metavar="X", help="limit parent density g(X)")
    group.add_argument(
        "--mixture",
        nargs=3,
        type=float,
        metavar=("M", "N", "X"),
        help="Poissonized-estimator expectation at X for uniform cells (M cells, sample size N)",
    )
    p_eval.set_defaults(func=cmd_eval)

    p_couple = sub.add_parser(
        "couple-check", help="verify the multinomial/Poisson coupling invariants"
    )
    p_couple.add_argument("--M", type=int, required=True, help="number of cells")
    p_couple.add_argument("--n", type=int, required=True, help="multinomial sample size")
    p_couple.add_argument("--draws", type=int, required=True, help="number of coupled draws")
    p_couple.add_argument("--seed", type=int, default=0, help="stream seed")
    p_couple.add_argument("--quiet", action="store_true")
    p_couple.set_defaults(func=cmd_couple_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
