import csv
import filecmp

import numpy as np
import pytest

from grbeam import experiments as ex, io, scenario as sc
from grbeam.pipeline import solve_downlink


def _rows(path):
    return list(csv.DictReader(open(path)))


def test_parse_range():
    assert ex.parse_range("0:10:2") == (0.0, 10.0, 2.0)
    assert ex.parse_range("5") == (5.0, 5.0, 1.0)
    for bad in ("a:b:c", "1:2", "5:1:1", "0:1:0", "0:inf:1"):
        with pytest.raises(io.ConfigError):
            ex.parse_range(bad)


def test_sweep_points_inclusive():
    assert np.allclose(ex.sweep_points((0.0, 1.0, 0.25)), [0, 0.25, 0.5, 0.75, 1.0])


def test_config_validation():
    with pytest.raises(io.ConfigError):
        ex.ExperimentConfig("example9").resolved()
    with pytest.raises(io.ConfigError):
        ex.ExperimentConfig("example1", runs=0).resolved()
    with pytest.raises(io.ConfigError):
        ex.ExperimentConfig("custom").resolved()
    with pytest.raises(io.ConfigError):
        ex.ExperimentConfig("example1", sinr_db=(0.0, float("nan"), 1.0)).resolved()


def test_experiment_defaults():
    c1 = ex.ExperimentConfig("example1").resolved()
    c3 = ex.ExperimentConfig("example3").resolved()
    assert (c1.runs, c1.n_rand, c1.sinr_db) == (300, 300, (0.0, 10.0, 1.0))
    assert (c3.runs, c3.n_rand) == (300, 100)


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv(ex.WORKERS_ENV, "3")
    assert ex.ExperimentConfig("example1").resolved().workers == 3


def test_matched_beam_pattern():
    N, theta0 = 8, 20.0
    h = sc.steering_vector(theta0, N)
    W = np.zeros((N, 2), dtype=complex)
    W[:, 0] = h / np.linalg.norm(h)
    grid, per_user, total = ex.beampattern([W], np.linspace(-90, 90, 721))
    assert grid[np.argmax(total)] == pytest.approx(theta0)
    assert total.max() == pytest.approx(np.vdot(h, h).real)


def test_beampattern_empty_grid():
    with pytest.raises(ValueError):
        ex.beampattern([np.eye(2)], [])


def test_sum_pattern_trace_identity():
    s = sc.example1()
    sol = solve_downlink(s)
    grid = np.linspace(-90, 90, 37)
    _, _, total = ex.beampattern(sol.W, grid)
    for t, v in zip(grid, total):
        h = sc.steering_vector(t, s.N)
        assert v == pytest.approx(sum(np.real(h.conj() @ G @ h) for G in sol.gram()), rel=1e-10)


def test_example2_pattern_below_cap():
    s = sc.example2()
    sol = solve_downlink(s)
    _, _, total = ex.beampattern(sol.W, sc.COCHANNEL_ANGLES_EX2)
    assert np.all(total <= 0.1 + 1e-6)


def test_custom_single_user_closed_form(tmp_path):
    path = tmp_path / "one.json"
    path.write_text('{"N": 4, "users": [{"angle_deg": 30, "sinr_db": 0, "noise_power": 0.1}]}')
    ex.run_experiment(ex.ExperimentConfig("custom", scenario_path=str(path), sinr_db=(0.0, 10.0, 5.0),
                                          out=str(tmp_path / "out")))
    rows = [r for r in _rows(tmp_path / "out" / "power.csv") if r["approach"] == "general"]
    for r in rows:
        gamma = 10 ** (float(r["sinr_db"]) / 10)
        assert float(r["mean_power"]) == pytest.approx(gamma * 0.1 / 4, rel=1e-7)


def test_example1_outputs(tmp_path):
    files = ex.run_experiment(ex.ExperimentConfig("example1", runs=2, n_rand=10, sinr_db=(0.0, 10.0, 10.0),
                                                  out=str(tmp_path)))
    assert set(files) == {"ranks", "power", "feasibility", "runs"}
    assert next(open(files["power"])).strip().split(",") == list(ex.POWER_HEADER)
    feas = _rows(files["feasibility"])
    assert len(feas) == 2 * len(ex.APPROACHES)
    ranks = _rows(files["ranks"])
    for x in ("0.0", "10.0"):
        for user in ("1", "2", "3"):
            share = sum(float(r["percent"]) for r in ranks if r["sinr_db"] == x and r["user"] == user)
            assert share == pytest.approx(100.0)


def test_example4_outputs(tmp_path):
    files = ex.run_experiment(ex.ExperimentConfig("example4", n_rand=5, out=str(tmp_path)))
    assert {"beampattern", "solution", "rank_table"} <= set(files)
    pattern = _rows(files["beampattern"])
    assert len(pattern) == len(ex.sweep_points((-90.0, 90.0, 0.25)))
    W, K, _ = io.load_solution(files["solution"])
    assert K == 1 and len(W) == 3


def test_infeasible_runs_counted(tmp_path):
    path = tmp_path / "hard.json"
    path.write_text('{"N": 2, "users": [{"angle_deg": 0, "sinr_db": 0}], '
                    '"shaping": [{"type": "sidelobe", "angles_deg": [0], "cap": 0.001}]}')
    files = ex.run_experiment(ex.ExperimentConfig("custom", scenario_path=str(path), sinr_db=(0.0, 0.0, 1.0),
                                                  out=str(tmp_path / "o")))
    for r in _rows(files["feasibility"]):
        assert r["feasible_runs"] == "0" and r["runs"] == "1"


def test_seeded_output_identical_across_worker_counts(tmp_path):
    outs = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}"
        ex.run_experiment(ex.ExperimentConfig("example3", runs=4, n_rand=5, seed=11, workers=workers,
                                              out=str(out)))
        outs.append(out)
    for name in ("ranks.csv", "power.csv", "feasibility.csv", "runs.csv"):
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False)


def test_gnuplot_script(tmp_path):
    (tmp_path / "power.csv").write_text(",".join(ex.POWER_HEADER) + "\n")
    script = ex.gnuplot_script(tmp_path)
    assert "power.png" in script and "feasibility.png" not in script
