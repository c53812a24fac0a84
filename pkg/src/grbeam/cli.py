"""Command-line entry point.

Exit codes: 0 on completion, 1 on solver failure, 2 on a configuration
error, 3 when a scenario passed to ``solve`` is infeasible.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex, io
from .linksim import RunConfig, empirical_sinr
from .pipeline import SolveOptions, solve_downlink
from .randomize import RandomizationFailed
from .sdr import InfeasibleError, MaxIterationsError

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="grbeam", description="General-rank downlink beamforming.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="design beamformers for a scenario file")
    s.add_argument("scenario")
    s.add_argument("--out", help="write the solution JSON here")
    s.add_argument("--rand", type=int, default=300, help="randomization instances")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-k", type=int, default=8, choices=(1, 2, 4, 8))

    e = sub.add_parser("experiment", help="run a Monte-Carlo experiment")
    e.add_argument("name", choices=ex.EXPERIMENTS)
    e.add_argument("scenario", nargs="?", help="scenario file for 'custom'")
    e.add_argument("--runs", type=int)
    e.add_argument("--rand", type=int)
    e.add_argument("--sinr-db", type=ex.parse_range)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="results")
    e.add_argument("--workers", type=int, help=f"overrides ${ex.WORKERS_ENV}")

    b = sub.add_parser("beampattern", help="print the beam pattern of a solution as CSV")
    b.add_argument("solution")
    b.add_argument("--grid", type=ex.parse_range, default=(-90.0, 90.0, 0.25))
    b.add_argument("--out", help="write CSV here instead of stdout")

    m = sub.add_parser("simulate", help="link-level simulation of a solution")
    m.add_argument("scenario")
    m.add_argument("solution")
    m.add_argument("--blocks", type=int, default=100_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", help="write CSV here instead of stdout")

    g = sub.add_parser("plot", help="write a gnuplot script for an output directory")
    g.add_argument("directory")
    return p


def _solve(args):
    scenario = io.load_scenario(args.scenario)
    try:
        opts = SolveOptions(n_rand=args.rand, seed=args.seed, max_code_dim=args.max_k)
    except ValueError as exc:
        raise io.ConfigError(str(exc)) from exc
    try:
        sol = solve_downlink(scenario, opts)
    except (InfeasibleError, RandomizationFailed) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except MaxIterationsError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.out:
        io.save_solution(sol, scenario.N, args.out)
    d = sol.diagnostics
    summary = {"K": sol.K, "exact": sol.exact, "total_power": sol.total_power,
               "sdr_objective": d["sdr_objective"], "sdr_status": d["sdr_status"],
               "initial_ranks": d["initial_ranks"], "ranks": d["ranks"],
               "sinr_db": [float(10 * np.log10(s)) for s in d["sinr"]],
               "shaping_violation": d["shaping_violation"]}
    print(json.dumps(io._plain(summary), indent=1))
    return EXIT_OK


def _experiment(args):
    cfg = ex.ExperimentConfig(args.name, runs=args.runs, n_rand=args.rand, sinr_db=args.sinr_db,
                              seed=args.seed, out=args.out, workers=args.workers,
                              scenario_path=args.scenario)
    files = ex.run_experiment(cfg)
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _beampattern(args):
    W, _, _ = io.load_solution(args.solution)
    grid, per_user, total = ex.beampattern(W, ex.sweep_points(args.grid))
    lines = [",".join(["theta_deg"] + [f"user{i + 1}" for i in range(len(W))] + ["sum"])]
    for t, pu, s in zip(grid, per_user, total):
        lines.append(",".join(repr(float(v)) for v in (t, *pu, s)))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _simulate(args):
    scenario = io.load_scenario(args.scenario)
    W, _, _ = io.load_solution(args.solution)
    if len(W) != scenario.M or W[0].shape[0] != scenario.N:
        raise io.ConfigError("solution does not match scenario dimensions")
    try:
        cfg = RunConfig(blocks=args.blocks, seed=args.seed)
    except ValueError as exc:
        raise io.ConfigError(str(exc)) from exc
    run = empirical_sinr(cfg, W, scenario)
    if args.out:
        run.write_csv(args.out)
    else:
        for rec in run.records:
            print(",".join(str(v) for v in rec.csv_row().values()))
    return EXIT_OK


def _plot(args):
    d = Path(args.directory)
    if not d.is_dir():
        raise io.ConfigError(f"not a directory: {d}")
    path = d / "plots.gp"
    path.write_text(ex.gnuplot_script(d))
    print(path)
    return EXIT_OK


COMMANDS = {"solve": _solve, "experiment": _experiment, "beampattern": _beampattern,
            "simulate": _simulate, "plot": _plot}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except io.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
