"""Monte-Carlo experiment driver writing one CSV per figure-equivalent.

Every run is compared across three approaches that share the relaxation and
its rank reduction: the general-rank design (code dimension up to 8) and the
rank-one and rank-two baselines, which fall back to randomization with their
own column count whenever the reduced rank exceeds their cap.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import io, scenario as sc
from .pipeline import SolveOptions, finish, relax_and_reduce
from .randomize import RandomizationFailed
from .sdr import InfeasibleError, MaxIterationsError

log = logging.getLogger(__name__)

WORKERS_ENV = "GRBEAM_WORKERS"
APPROACHES = (("general", 8), ("rank1", 1), ("rank2", 2))
EXPERIMENTS = ("example1", "example2", "example3", "example4", "custom")

_DEFAULTS = {
    "example1": dict(runs=300, n_rand=300, sinr_db=(0.0, 10.0, 1.0)),
    "example2": dict(runs=1, n_rand=300, sinr_db=(10.0, 10.0, 1.0)),
    "example3": dict(runs=300, n_rand=100, sinr_db=(0.0, 5.0, 1.0)),
    "example4": dict(runs=1, n_rand=300, sinr_db=(10.0, 10.0, 1.0)),
    "custom": dict(runs=1, n_rand=300, sinr_db=(0.0, 10.0, 1.0)),
}
EX3_SINR_RANGE = (0.0, 5.0)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    runs: int | None = None
    n_rand: int | None = None
    sinr_db: tuple | None = None
    seed: int = 0
    out: str = "results"
    workers: int | None = None
    scenario_path: str | None = None
    grid: tuple = (-90.0, 90.0, 0.25)

    def resolved(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise io.ConfigError(f"unknown experiment {self.experiment!r}")
        d = _DEFAULTS[self.experiment]
        cfg = replace(self,
                      runs=d["runs"] if self.runs is None else self.runs,
                      n_rand=d["n_rand"] if self.n_rand is None else self.n_rand,
                      sinr_db=d["sinr_db"] if self.sinr_db is None else tuple(self.sinr_db),
                      workers=self.workers or int(os.environ.get(WORKERS_ENV, "1") or 1))
        if cfg.runs < 1 or cfg.n_rand < 1:
            raise io.ConfigError("runs and randomization instances must be at least 1")
        if cfg.workers < 1:
            raise io.ConfigError("worker count must be at least 1")
        sweep_points(cfg.sinr_db)
        sweep_points(cfg.grid)
        if cfg.experiment == "custom" and not cfg.scenario_path:
            raise io.ConfigError("custom experiment needs a scenario file")
        return cfg


def parse_range(text: str) -> tuple:
    """'lo:hi:step' (or a single value) to a float triple."""
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError as exc:
        raise io.ConfigError(f"bad range {text!r}") from exc
    if len(parts) == 1:
        parts = [parts[0], parts[0], 1.0]
    if len(parts) != 3:
        raise io.ConfigError(f"range must be lo:hi:step, got {text!r}")
    sweep_points(tuple(parts))
    return tuple(parts)


def sweep_points(rng3) -> np.ndarray:
    lo, hi, step = rng3
    if not all(math.isfinite(v) for v in (lo, hi, step)):
        raise io.ConfigError("sweep bounds must be finite")
    if step <= 0 or hi < lo:
        raise io.ConfigError("sweep needs lo <= hi and step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def beampattern(W_list, grid_deg):
    """Per-user received power |W_m^H h(theta)|^2 and their sum on the grid."""
    grid = np.asarray(grid_deg, dtype=float)
    if grid.size == 0:
        raise ValueError("angle grid is empty")
    N = W_list[0].shape[0]
    H = np.stack([sc.steering_vector(t, N) for t in grid])
    per_user = np.stack([np.sum(np.abs(H.conj() @ W) ** 2, axis=1) for W in W_list], axis=1)
    return grid, per_user, per_user.sum(axis=1)


# -- per-run evaluation ------------------------------------------------------

def evaluate(scenario, n_rand: int, seed_key) -> dict:
    """Solve one scenario under all three approaches."""
    out = {"status": "ok", "initial_ranks": None, "ranks": None, "approaches": {}}
    try:
        reduced = relax_and_reduce(scenario, SolveOptions(n_rand=n_rand))
    except InfeasibleError:
        out["status"] = "infeasible"
        for name, _ in APPROACHES:
            out["approaches"][name] = dict(feasible=False, exact=False, power=math.nan, K=0)
        return out
    except MaxIterationsError:
        out["status"] = "solver_failure"
        for name, _ in APPROACHES:
            out["approaches"][name] = dict(feasible=False, exact=False, power=math.nan, K=0)
        return out
    out["initial_ranks"] = reduced.diagnostics["initial_ranks"]
    out["ranks"] = reduced.ranks
    out["sdr_objective"] = reduced.diagnostics["sdr_objective"]
    out["sdr_status"] = reduced.diagnostics["sdr_status"]
    for name, cap in APPROACHES:
        rng = np.random.default_rng(list(seed_key) + [cap])
        try:
            sol = finish(scenario, reduced, SolveOptions(n_rand=n_rand, max_code_dim=cap), rng)
            out["approaches"][name] = dict(feasible=True, exact=sol.exact, power=sol.total_power, K=sol.K)
            if name == "general":
                out["solution"] = sol
        except RandomizationFailed:
            out["approaches"][name] = dict(feasible=False, exact=False, power=math.nan, K=cap)
    return out


def _build(experiment, sinr_db, seed, run, scenario_path):
    geo = np.random.default_rng([seed, run])
    if experiment == "example1":
        return sc.example1(sinr_db, rng=geo)
    if experiment in ("example2", "example4"):
        make = sc.example2 if experiment == "example2" else sc.example4
        return make(sinr_db) if run == 0 else make(sinr_db, rng=geo)
    if experiment == "example3":
        targets = np.random.default_rng([seed, run, 1]).uniform(*EX3_SINR_RANGE, size=3)
        return sc.example2(targets, rng=geo)
    base = io.load_scenario(scenario_path)
    return base.with_sinr(float(sc.db2lin(sinr_db)))


def _task(args):
    experiment, point, sinr_db, run, seed, n_rand, scenario_path, keep = args
    scenario = _build(experiment, sinr_db, seed, run, scenario_path)
    res = evaluate(scenario, n_rand, (seed, run, point))
    res["max_target_db"] = float(max(sc.lin2db(u.sinr_target) for u in scenario.users))
    if not keep:
        res.pop("solution", None)
    else:
        res["N"] = scenario.N
    return point, run, res


def _map(tasks, workers):
    if workers <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=1))


# -- CSV output --------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _rank_rows(groups, M):
    rows = []
    for x, results in groups:
        counts = [Counter() for _ in range(M)]
        total = 0
        for r in results:
            if r["ranks"] is None:
                continue
            total += 1
            for i, k in enumerate(r["ranks"]):
                counts[i][k] += 1
        for i in range(M):
            for k in sorted(counts[i]):
                rows.append((x, i + 1, k, counts[i][k], 100.0 * counts[i][k] / total))
    return rows


def _power_rows(groups):
    rows = []
    for x, results in groups:
        common = [r for r in results if all(r["approaches"][n]["feasible"] for n, _ in APPROACHES)]
        for name, _ in APPROACHES:
            own = [r["approaches"][name]["power"] for r in results if r["approaches"][name]["feasible"]]
            com = [r["approaches"][name]["power"] for r in common]
            rows.append((x, name, len(results), len(own),
                         float(np.mean(own)) if own else math.nan,
                         len(com), float(np.mean(com)) if com else math.nan))
    return rows


def _feasibility_rows(groups):
    rows = []
    for x, results in groups:
        for name, _ in APPROACHES:
            ok = sum(r["approaches"][name]["feasible"] for r in results)
            n = len(results)
            rows.append((x, name, n, ok, 100.0 * ok / n if n else math.nan))
    return rows


RANK_HEADER = ("sinr_db", "user", "rank", "count", "percent")
POWER_HEADER = ("sinr_db", "approach", "runs", "feasible_runs", "mean_power",
                "common_runs", "mean_power_common")
FEAS_HEADER = ("sinr_db", "approach", "runs", "feasible_runs", "percent")


def _nearest(points, value):
    return float(points[int(np.argmin(np.abs(points - value)))])


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the experiment and write its CSV files; returns name -> path."""
    cfg = config.resolved()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    points = sweep_points(cfg.sinr_db)
    single = cfg.experiment in ("example2", "example4")
    if cfg.experiment == "example3":
        tasks = [(cfg.experiment, 0, float(points[0]), r, cfg.seed, cfg.n_rand, None, False)
                 for r in range(cfg.runs)]
    else:
        tasks = [(cfg.experiment, p, float(s), r, cfg.seed, cfg.n_rand, cfg.scenario_path,
                  single and r == 0 and p == 0)
                 for p, s in enumerate(points) for r in range(cfg.runs)]
    results = _map(tasks, cfg.workers)

    if cfg.experiment == "example3":
        buckets = {float(x): [] for x in points}
        for _, _, res in results:
            buckets[_nearest(points, res["max_target_db"])].append(res)
        groups = [(float(x), buckets[float(x)]) for x in points]
    else:
        groups = [(float(x), [res for p, _, res in results if p == i]) for i, x in enumerate(points)]

    M = next((len(r["ranks"]) for _, _, r in results if r["ranks"] is not None), 3)
    files = {
        "ranks": _write(out / "ranks.csv", RANK_HEADER, _rank_rows(groups, M)),
        "power": _write(out / "power.csv", POWER_HEADER, _power_rows(groups)),
        "feasibility": _write(out / "feasibility.csv", FEAS_HEADER, _feasibility_rows(groups)),
    }
    runs_rows = []
    for p, r, res in results:
        for name, _ in APPROACHES:
            a = res["approaches"][name]
            runs_rows.append((p, r, res["max_target_db"], name, res["status"], a["feasible"], a["exact"],
                              a["K"], a["power"], " ".join(map(str, res["ranks"] or []))))
    files["runs"] = _write(out / "runs.csv", ("point", "run", "max_sinr_db", "approach", "sdr_status",
                                               "feasible", "exact", "K", "power", "ranks"), runs_rows)

    if single:
        first = next(res for p, r, res in results if p == 0 and r == 0)
        sol = first.get("solution")
        if sol is not None:
            grid, per_user, total = beampattern(sol.W, sweep_points(cfg.grid))
            rows = [(float(t),) + tuple(float(v) for v in pu) + (float(s),)
                    for t, pu, s in zip(grid, per_user, total)]
            header = ("theta_deg",) + tuple(f"user{i + 1}" for i in range(per_user.shape[1])) + ("sum",)
            files["beampattern"] = _write(out / "beampattern.csv", header, rows)
            files["solution"] = io.save_solution(sol, first["N"], out / "solution.json")
            table = [(i + 1, a, b) for i, (a, b) in enumerate(zip(first["initial_ranks"], first["ranks"]))]
            files["rank_table"] = _write(out / "rank_table.csv", ("user", "relaxed_rank", "reduced_rank"), table)
    return files


# -- plotting helper ---------------------------------------------------------

def gnuplot_script(directory) -> str:
    """A gnuplot script plotting whichever CSVs exist in ``directory``."""
    d = Path(directory)
    lines = ["set datafile separator ','", "set key outside", "set grid", "set terminal pngcairo size 900,600"]
    if (d / "power.csv").exists():
        lines += ["set output 'power.png'", "set xlabel 'SINR [dB]'", "set ylabel 'power per slot'",
                  "plot " + ", ".join(
                      f"'power.csv' using 1:(strcol(2) eq '{n}' ? $5 : 1/0) with linespoints title '{n}'"
                      for n, _ in APPROACHES)]
    if (d / "feasibility.csv").exists():
        lines += ["set output 'feasibility.png'", "set xlabel 'SINR [dB]'", "set ylabel 'feasible [%]'",
                  "plot " + ", ".join(
                      f"'feasibility.csv' using 1:(strcol(2) eq '{n}' ? $5 : 1/0) with linespoints title '{n}'"
                      for n, _ in APPROACHES)]
    if (d / "beampattern.csv").exists():
        with (d / "beampattern.csv").open() as fh:
            cols = fh.readline().strip().split(",")
        lines += ["set output 'beampattern.png'", "set xlabel 'angle [deg]'", "set ylabel 'power [dB]'",
                  "plot " + ", ".join(f"'beampattern.csv' using 1:(10*log10(${j + 1})) with lines title '{c}'"
                                      for j, c in enumerate(cols) if j > 0)]
    if (d / "ranks.csv").exists():
        lines += ["set output 'ranks.png'", "set xlabel 'SINR [dB]'", "set ylabel 'percent'",
                  "plot 'ranks.csv' using 1:5:3 with points pt 7 palette title 'rank share'"]
    return "\n".join(lines) + "\n"
