"""Command-line front end: single runs, Monte-Carlo sweeps, gradient checks.

Exit codes: 0 success, 1 usage/runtime error, 2 metric failure (connectivity
lost, or gradient tolerance exceeded).  Output files are byte-stable for
identical inputs: floats are printed with 9 significant digits and rows are
sorted, so results are independent of DCMU_THREADS.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

from . import __version__
from .gradcheck import run_gradcheck
from .scenario import ScenarioError, parse_scenario, serialize_scenario, with_algo, with_noise
from .simulator import MonteCarloResult, default_workers, monte_carlo, run_episode

DEFAULT_SWEEP = "0,0.01,0.02x1,2,3,4,5"


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.8e}"


def _scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _write_steps_csv(path: str, records, n_robots: int) -> None:
    header = [
        "t",
        "lambda2_true",
        "lambda2_weighted",
        "lambda2_est_min",
        "lambda2_est_max",
        "min_robot_dist",
        "min_obst_clearance",
    ]
    for k in range(n_robots):
        header += [f"x_true_{k}", f"y_true_{k}", f"x_nom_{k}", f"y_nom_{k}"]
    lines = [",".join(header)]
    for rec in records:
        row = [
            _fmt(rec.t),
            _fmt(rec.lambda2_true),
            _fmt(rec.lambda2_weighted),
            _fmt(rec.lambda2_est_min),
            _fmt(rec.lambda2_est_max),
            _fmt(rec.min_robot_dist),
            _fmt(rec.min_obst_clearance),
        ]
        for k in range(n_robots):
            row += [
                _fmt(rec.positions_true[k].x),
                _fmt(rec.positions_true[k].y),
                _fmt(rec.positions_nom[k].x),
                _fmt(rec.positions_nom[k].y),
            ]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_summary(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = parse_scenario(args.scenario)
    except (OSError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    scenario = with_algo(scenario, args.algo)
    os.makedirs(args.out, exist_ok=True)
    metrics = run_episode(scenario, args.seed)
    _write_steps_csv(
        os.path.join(args.out, "steps.csv"), metrics.records, len(scenario.robots)
    )
    canonical = serialize_scenario(scenario)
    _write_summary(
        os.path.join(args.out, "summary.json"),
        {
            "algorithm": scenario.algo,
            "success": metrics.success,
            "aborted": metrics.aborted,
            "min_lambda2_true": _fmt(metrics.min_lambda2_true),
            "collision_occurred": metrics.collision_occurred,
            "steps": metrics.steps,
            "seed": args.seed,
            "scenario_hash": _scenario_hash(canonical),
            "tool_version": __version__,
        },
    )
    if metrics.aborted:
        print("run aborted on non-finite state", file=sys.stderr)
        return 1
    print(
        f"{scenario.algo} seed={args.seed}: "
        f"{'success' if metrics.success else 'CONNECTIVITY LOST'} "
        f"(min lambda2_true={metrics.min_lambda2_true:.6f}, steps={metrics.steps})"
    )
    return 0 if metrics.success else 2


def _parse_sweep(spec: str) -> tuple[list[float], list[float]]:
    try:
        q_part, r_part = spec.split("x")
        qs = [float(v) for v in q_part.split(",") if v != ""]
        rs = [float(v) for v in r_part.split(",") if v != ""]
    except ValueError:
        raise ValueError(f"bad sweep spec {spec!r}; expected 'q1,q2x r1,r2'") from None
    if not qs or not rs:
        raise ValueError(f"bad sweep spec {spec!r}: empty axis")
    return qs, rs


def cmd_montecarlo(args: argparse.Namespace) -> int:
    try:
        scenario = parse_scenario(args.scenario)
    except (OSError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.runs < 1:
        print("error: --runs must be >= 1", file=sys.stderr)
        return 1
    scenario = with_algo(scenario, args.algo)
    if args.sweep is not None:
        try:
            qs, rs = _parse_sweep(args.sweep)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        cells = [(q, r) for q in qs for r in rs]
    else:
        cells = [(float(scenario.noise.Q[0, 0]), float(scenario.noise.R[0, 0]))]
    os.makedirs(args.out, exist_ok=True)
    workers = args.workers if args.workers is not None else default_workers()
    rows = []
    per_run = {}
    for q, r in sorted(cells):
        cell_scn = with_noise(scenario, q, r)
        result: MonteCarloResult = monte_carlo(
            cell_scn, args.runs, args.seed_base, workers=workers
        )
        rows.append((q, r, scenario.algo, result.runs, result.successes, result.ratio))
        per_run[f"q={q!r},r={r!r}"] = {
            "success_flags": [s.success for s in result.summaries],
            "min_lambda2_true": [_fmt(s.min_lambda2_true) for s in result.summaries],
        }
        print(
            f"Q={q} R={r} {scenario.algo}: ratio={result.ratio:.3f} "
            f"({result.successes}/{result.runs})"
        )
    lines = ["Q,R,algo,runs,successes,ratio"]
    for q, r, algo, runs, succ, ratio in rows:
        lines.append(f"{_fmt(q)},{_fmt(r)},{algo},{runs},{succ},{_fmt(ratio)}")
    with open(os.path.join(args.out, "cells.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    canonical = serialize_scenario(scenario)
    _write_summary(
        os.path.join(args.out, "summary.json"),
        {
            "algorithm": scenario.algo,
            "runs_per_cell": args.runs,
            "seed_base": args.seed_base,
            "cells": [
                {"Q": _fmt(q), "R": _fmt(r), "successes": s, "ratio": _fmt(ratio)}
                for q, r, _, _, s, ratio in rows
            ],
            "per_run": per_run,
            "scenario_hash": _scenario_hash(canonical),
            "tool_version": __version__,
        },
    )
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 1
    result = run_gradcheck(args.trials, args.seed)
    print(
        f"gradcheck: {result.evaluated} smooth configurations, "
        f"max relative error {result.max_rel_err:.3e}"
    )
    for key in sorted(result.branch_counts):
        print(f"  {key}: {result.branch_counts[key]}")
    return 0 if result.passed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcmu",
        description="Decentralized connectivity maintenance simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single seeded episode")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int, default=1)
    p_run.add_argument("--algo", choices=("dcmu", "baseline"), default="dcmu")
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_mc = sub.add_parser("montecarlo", help="seeded Monte-Carlo success ratios")
    p_mc.add_argument("--scenario", required=True)
    p_mc.add_argument("--runs", type=int, default=100)
    p_mc.add_argument("--seed-base", type=int, default=1)
    p_mc.add_argument("--algo", choices=("dcmu", "baseline"), default="dcmu")
    p_mc.add_argument(
        "--sweep",
        nargs="?",
        const=DEFAULT_SWEEP,
        default=None,
        help="noise grid 'q1,q2,..xr1,r2,..' (default grid when given bare)",
    )
    p_mc.add_argument("--workers", type=int, default=None)
    p_mc.add_argument("--out", required=True)
    p_mc.set_defaults(func=cmd_montecarlo)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    p_gc.add_argument("--trials", type=int, default=1000)
    p_gc.add_argument("--seed", type=int, default=1)
    p_gc.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
