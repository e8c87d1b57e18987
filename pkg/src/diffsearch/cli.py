"""Reproducible experiment runner.

Verbs:
  estimate   marginal-density estimation on a named benchmark
  knapsack   penalty-transformed knapsack run with an exact DP reference
  hybrid     greedy density-guided simplex search
  replay     re-execute a finished run and verify artifact hashes

Settings merge in three layers: built-in defaults, then a flat key=value
config file (--config), then explicit CLI flags. Every random draw in a
run descends from the single --seed through fixed stream ids, so a rerun
with the same settings reproduces every artifact byte for byte.
"""

from __future__ import annotations

import argparse
import re
import shutil
import sys
from pathlib import Path

import numpy as np

from .errors import DiffsearchError
from .fokker import (
    EstimatorConfig,
    estimate_marginals,
    marginal_mode,
    probability_interval,
)
from .hybrid import SimplexConfig, greedy_search
from .numerics import RngStream
from .problems import (
    BarrierParams,
    counted,
    flips_from_distance,
    generate_instance,
    knapsack_transform,
    load_instance,
    make_benchmark,
    normalized_distance,
    round_to_binary,
    save_instance,
    solve_knapsack_exact,
)
from .reporting import (
    export_density_csv,
    hash_file,
    read_manifest,
    render_density_figure,
    render_trace_figure,
    summarize_marginals,
    write_manifest,
    write_summary,
)

_INSTANCE_STREAM = 9999

_DEFAULTS: dict[str, object] = {
    "problem": "schwefel",
    "N": 30,
    "R": 10.0,
    "c": 100.0,
    "k0": 10.0,
    "k1": 7.1,
    "b0": 10.0,
    "b1": 0.01,
    "b2": "2*b1",
    "L": 100,
    "D": 1.0,
    "M": 300,
    "table_size": 2048,
    "conv_tol": 0.01,
    "burn_in": 0,
    "grad_step": 1e-6,
    "seed": 0,
    "replicates": 1,
    "iterations": 100,
    "ftol": 1e-4,
    "max_evals": 50_000,
    "ablation": False,
    "construction": "sample",
    "mass": 0.95,
    "figures": True,
    "instance": "",
}

_PARSERS = {
    "problem": str,
    "N": int,
    "R": float,
    "c": float,
    "k0": float,
    "k1": float,
    "b0": float,
    "b1": float,
    "b2": str,
    "L": int,
    "D": float,
    "M": int,
    "table_size": int,
    "conv_tol": float,
    "burn_in": int,
    "grad_step": float,
    "seed": int,
    "replicates": int,
    "iterations": int,
    "ftol": float,
    "max_evals": int,
    "ablation": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
    "construction": str,
    "mass": float,
    "figures": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
    "instance": str,
}


class ConfigError(Exception):
    pass


def load_config(path) -> dict[str, str]:
    """Flat key = value file; # starts a comment, blank lines ignored."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        raw[key] = value
    return raw


def resolve_settings(args: argparse.Namespace) -> dict[str, object]:
    """Merge defaults <- config file <- CLI flags, then coerce and validate."""
    merged: dict[str, object] = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            if key == "verb":
                continue
            if key not in _DEFAULTS:
                raise ConfigError(f"config: unknown key {key!r}")
            merged[key] = value
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag

    settings: dict[str, object] = {}
    for key, value in merged.items():
        try:
            settings[key] = _PARSERS[key](value) if isinstance(value, str) else value
        except (TypeError, ValueError) as err:
            raise ConfigError(f"config: {key}: cannot parse {value!r} ({err})") from err

    b2 = settings["b2"]
    if isinstance(b2, str):
        match = re.fullmatch(r"\s*([0-9.eE+-]+)\s*\*\s*b1\s*", b2)
        if match:
            settings["b2"] = float(match.group(1)) * float(settings["b1"])
        else:
            try:
                settings["b2"] = float(b2)
            except ValueError as err:
                raise ConfigError(f"config: b2: expected number or '<k>*b1', got {b2!r}") from err
    return settings


def _estimator_config(settings: dict) -> EstimatorConfig:
    try:
        return EstimatorConfig(
            L=settings["L"],
            D=settings["D"],
            M=settings["M"],
            table_size=settings["table_size"],
            conv_tol=settings["conv_tol"],
            burn_in=settings["burn_in"],
            grad_step=settings["grad_step"],
        )
    except ValueError as err:
        raise ConfigError(f"config: estimator: {err}") from err


def _config_echo(verb: str, settings: dict, keys: list[str]) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = [("verb", verb)]
    rows += [(key, settings[key]) for key in keys]
    return rows


def _write_run_config(out: Path, verb: str, settings: dict) -> None:
    rows = [("verb", verb)]
    rows += [(key, settings[key]) for key in sorted(_DEFAULTS)]
    write_summary(out / "config.txt", rows)


_EST_KEYS = ["problem", "L", "D", "M", "table_size", "conv_tol", "burn_in", "grad_step", "seed", "replicates"]
_KP_KEYS = ["N", "R", "c", "k0", "k1", "b0", "b1", "b2", "L", "D", "M", "table_size", "conv_tol", "burn_in", "grad_step", "seed", "replicates"]
_HYB_KEYS = ["problem", "L", "D", "iterations", "ftol", "max_evals", "ablation", "construction", "seed", "replicates"]


def _marginal_artifacts(est, problem, rep_dir: Path, settings: dict, extra_rows, counter) -> None:
    rep_dir.mkdir(parents=True, exist_ok=True)
    export_density_csv(est, rep_dir)
    n_dim = est.dimension
    modes = np.array([marginal_mode(est, n) for n in range(n_dim)])
    rows: list[tuple[str, object]] = list(extra_rows)
    rows += [
        ("stop_reason", est.stop_reason),
        ("sweeps_run", est.sweeps_run),
        ("sweeps_averaged", est.n_samples),
        ("conditionals_built", est.conditionals_built),
        ("repair_count", est.repair_count),
        ("repair_strong_count", est.repair_strong_count),
        ("evals_cost", counter.count),
        ("evals_expected", 2 * (settings["L"] - 1) * n_dim * est.sweeps_run),
        ("mode_vector", modes),
    ]
    if problem.known_optimum is not None:
        opt_x, _ = problem.known_optimum
        rows.append(("mode_distance_norm", normalized_distance(modes, opt_x, problem.bounds)))
    rows.append(("mode_value", problem.cost(modes)))
    rows += summarize_marginals(est, settings["mass"])
    write_summary(rep_dir / "summary.txt", rows)
    if settings["figures"]:
        render_density_figure(est, rep_dir / "densities.png", problem.name, settings["mass"])


def cmd_estimate(settings: dict, out: Path) -> int:
    problem = make_benchmark(settings["problem"])
    cfg = _estimator_config(settings)
    failures: list[tuple[int, str]] = []
    for rep in range(settings["replicates"]):
        rng = RngStream(settings["seed"], rep)
        wrapped, counter = counted(problem)
        try:
            est = estimate_marginals(wrapped, cfg, rng)
        except DiffsearchError as err:
            failures.append((rep, str(err)))
            continue
        extra = _config_echo("estimate", settings, _EST_KEYS) + [("replicate", rep)]
        _marginal_artifacts(est, problem, out / f"replicate{rep}", settings, extra, counter)

    top = _config_echo("estimate", settings, _EST_KEYS)
    top += [("replicates_failed", len(failures))]
    top += [(f"replicate{rep}.error", msg) for rep, msg in failures]
    write_summary(out / "summary.txt", top)
    return 1 if failures else 0


def cmd_knapsack(settings: dict, out: Path) -> int:
    if settings["instance"]:
        inst = load_instance(settings["instance"])
    else:
        inst = generate_instance(
            settings["N"], settings["R"], settings["c"], RngStream(settings["seed"], _INSTANCE_STREAM)
        )
    out.mkdir(parents=True, exist_ok=True)
    save_instance(inst, out / "instance.txt")
    x_opt, v_opt = solve_knapsack_exact(inst)

    barriers = BarrierParams(
        k0=settings["k0"], k1=settings["k1"], b0=settings["b0"], b1=settings["b1"], b2=settings["b2"]
    )
    problem = knapsack_transform(inst, barriers)
    cfg = _estimator_config(settings)
    unit_bounds = problem.bounds

    failures: list[tuple[int, str]] = []
    top = _config_echo("knapsack", settings, _KP_KEYS)
    top += [
        ("instance_file", "instance.txt"),
        ("dp_value", v_opt),
        ("dp_solution", x_opt),
    ]
    for rep in range(settings["replicates"]):
        rng = RngStream(settings["seed"], rep)
        wrapped, counter = counted(problem)
        try:
            est = estimate_marginals(wrapped, cfg, rng)
        except DiffsearchError as err:
            failures.append((rep, str(err)))
            continue
        modes = np.array([marginal_mode(est, n) for n in range(est.dimension)])
        rounded = round_to_binary(modes)
        flips = int(np.sum(rounded != x_opt))
        gap_raw = normalized_distance(modes, x_opt.astype(float), unit_bounds)
        gap_rounded = normalized_distance(rounded.astype(float), x_opt.astype(float), unit_bounds)
        lengths = np.empty(est.dimension)
        for n in range(est.dimension):
            lo_x, hi_x = probability_interval(est, n, settings["mass"])
            lengths[n] = hi_x - lo_x
        joint_interval = float(np.sqrt(np.sum(lengths**2) / est.dimension))

        extra = _config_echo("knapsack", settings, _KP_KEYS) + [
            ("replicate", rep),
            ("dp_value", v_opt),
            ("dp_solution", x_opt),
            ("rounded_mode", rounded),
            ("flips_rounded", flips),
            ("gap_rounded_norm", gap_rounded),
            ("gap_raw_norm", gap_raw),
            ("flips_from_gap_raw", flips_from_distance(gap_raw, est.dimension)),
            ("interval_joint_norm", joint_interval),
            ("best_binary_value", float(np.dot(inst.q, rounded))),
            ("rounded_weight", float(np.dot(inst.w, rounded))),
            ("capacity", inst.c),
        ]
        _marginal_artifacts(est, problem, out / f"replicate{rep}", settings, extra, counter)
        top += [
            (f"replicate{rep}.interval_joint_norm", joint_interval),
            (f"replicate{rep}.flips_rounded", flips),
            (f"replicate{rep}.gap_raw_norm", gap_raw),
        ]

    top += [("replicates_failed", len(failures))]
    top += [(f"replicate{rep}.error", msg) for rep, msg in failures]
    write_summary(out / "summary.txt", top)
    return 1 if failures else 0


def cmd_hybrid(settings: dict, out: Path) -> int:
    problem = make_benchmark(settings["problem"])
    est_cfg = _estimator_config(settings)
    try:
        simplex_cfg = SimplexConfig(ftol=settings["ftol"], max_evals=settings["max_evals"])
    except ValueError as err:
        raise ConfigError(f"config: simplex: {err}") from err

    failures: list[tuple[int, str]] = []
    successes = 0
    top = _config_echo("hybrid", settings, _HYB_KEYS)
    for rep in range(settings["replicates"]):
        rng = RngStream(settings["seed"], rep)
        try:
            report = greedy_search(
                problem,
                est_cfg,
                simplex_cfg,
                settings["iterations"],
                rng,
                ablation=settings["ablation"],
                construction=settings["construction"],
            )
        except DiffsearchError as err:
            failures.append((rep, str(err)))
            continue
        rep_dir = out / f"replicate{rep}"
        rep_dir.mkdir(parents=True, exist_ok=True)
        trace_lines = ["iteration,best_value,evals"]
        trace_lines += [f"{it},{val!r},{ev}" for it, val, ev in report.trace]
        (rep_dir / "trace.csv").write_text("\n".join(trace_lines) + "\n", encoding="ascii")
        rows = _config_echo("hybrid", settings, _HYB_KEYS) + [
            ("replicate", rep),
            ("best_value", report.best_value),
            ("best_point", report.best_point),
            ("success", report.success),
            ("evals_total", report.evals_total),
            ("iterations_run", report.iterations_run),
        ]
        write_summary(rep_dir / "summary.txt", rows)
        if settings["figures"]:
            render_trace_figure(report.trace, rep_dir / "trace.png", problem.name)
        successes += 1 if report.success else 0
        top += [
            (f"replicate{rep}.best_value", report.best_value),
            (f"replicate{rep}.success", report.success),
            (f"replicate{rep}.evals_total", report.evals_total),
        ]

    top += [("success_count", successes), ("replicates_failed", len(failures))]
    top += [(f"replicate{rep}.error", msg) for rep, msg in failures]
    write_summary(out / "summary.txt", top)
    return 1 if failures else 0


_VERBS = {"estimate": cmd_estimate, "knapsack": cmd_knapsack, "hybrid": cmd_hybrid}


def _run_verb(verb: str, settings: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    code = _VERBS[verb](settings, out)
    _write_run_config(out, verb, settings)
    write_manifest(out)
    return code


def cmd_replay(args: argparse.Namespace) -> int:
    src = Path(args.out)
    config_path = src / "config.txt"
    manifest_path = src / "manifest.txt"
    if not config_path.is_file() or not manifest_path.is_file():
        print(f"replay: {src} does not contain config.txt and manifest.txt", file=sys.stderr)
        return 2
    stored = load_config(config_path)
    verb = stored.pop("verb", "")
    if verb not in _VERBS:
        print(f"replay: unknown verb {verb!r} in {config_path}", file=sys.stderr)
        return 2
    shadow = argparse.Namespace(config=None, **{k: v for k, v in stored.items()})
    settings = resolve_settings(shadow)

    original = read_manifest(manifest_path)
    mismatches = []
    # integrity first: the recorded artifacts must still be on disk unchanged
    for rel, digest in sorted(original.items()):
        current = src / rel
        if not current.is_file():
            mismatches.append(f"missing on disk   {rel}")
        elif hash_file(current) != digest:
            mismatches.append(f"differs on disk   {rel}")

    tmp = src.parent / (src.name + ".replay-tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    try:
        _run_verb(verb, settings, tmp)
        fresh = read_manifest(tmp / "manifest.txt")
        for rel, digest in sorted(original.items()):
            if rel not in fresh:
                mismatches.append(f"missing in rerun  {rel}")
            elif fresh[rel] != digest:
                mismatches.append(f"differs in rerun  {rel}")
        for rel in sorted(set(fresh) - set(original)):
            mismatches.append(f"extra in rerun    {rel}")
        if mismatches:
            print(f"REPLAY MISMATCH ({len(mismatches)} issue(s)) for {src}")
            for line in mismatches:
                print("  " + line)
            return 1
        print(f"REPLAY OK: {len(original)} artifact(s) reproduced byte-identically")
        return 0
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffsearch",
        description="Stationary-density estimation experiments for stochastic search.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value settings file")
    common.add_argument("--out", required=True, help="output directory for run artifacts")
    common.add_argument("--seed", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--L", type=int, dest="L")
    common.add_argument("--D", type=float, dest="D")
    common.add_argument("--M", type=int, dest="M")
    common.add_argument("--table-size", type=int, dest="table_size")
    common.add_argument("--conv-tol", type=float, dest="conv_tol")
    common.add_argument("--burn-in", type=int, dest="burn_in")
    common.add_argument("--grad-step", type=float, dest="grad_step")
    common.add_argument("--mass", type=float)
    common.add_argument("--no-figures", action="store_const", const=False, dest="figures")

    p_est = sub.add_parser("estimate", parents=[common], help="marginal density estimation")
    p_est.add_argument("--problem")

    p_kp = sub.add_parser("knapsack", parents=[common], help="penalty knapsack estimation")
    p_kp.add_argument("--N", type=int, dest="N")
    p_kp.add_argument("--R", type=float, dest="R")
    p_kp.add_argument("--c", type=float, dest="c")
    p_kp.add_argument("--k0", type=float)
    p_kp.add_argument("--k1", type=float)
    p_kp.add_argument("--b0", type=float)
    p_kp.add_argument("--b1", type=float)
    p_kp.add_argument("--b2", help="number or '<k>*b1'")
    p_kp.add_argument("--instance", help="load a serialized instance instead of generating")

    p_hyb = sub.add_parser("hybrid", parents=[common], help="greedy density-guided search")
    p_hyb.add_argument("--problem")
    p_hyb.add_argument("--iterations", type=int)
    p_hyb.add_argument("--ftol", type=float)
    p_hyb.add_argument("--max-evals", type=int, dest="max_evals")
    p_hyb.add_argument("--ablation", action="store_const", const=True)
    p_hyb.add_argument("--construction", choices=["sample", "axes"])

    p_rep = sub.add_parser("replay", help="re-run a finished experiment and verify hashes")
    p_rep.add_argument("--out", required=True, help="directory of the original run")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "replay":
            return cmd_replay(args)
        settings = resolve_settings(args)
        return _run_verb(args.verb, settings, Path(args.out))
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DiffsearchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
