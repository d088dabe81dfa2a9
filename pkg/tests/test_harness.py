import json
import subprocess
import sys

import numpy as np
import pytest

from etcbandit import StreamSet, random_stable_system, run_experiment
from etcbandit.experiments import (
    ExperimentConfig,
    _select_best_cell,
    demo_system,
    parse_experiment_config,
    read_rows,
    write_rows,
)
from etcbandit.qubo import QuboProblem, brute_force_max
from etcbandit.systems import spectral_radius

from conftest import rng


def tiny_regret_cfg(**kw):
    base = dict(
        kind="regret_sweep", t_grid=(40,), replicates=2, seed=5,
        trials=16, restarts=5, c1=1.0, c2=0.75,
    )
    base.update(kw)
    return ExperimentConfig(**base)


# -- random systems ----------------------------------------------------------

def test_random_system_exact_radius_and_shapes():
    for seed, target in ((0, 0.1), (1, 0.55), (2, 0.9)):
        params = random_stable_system(5, 3, target, 0.05, 0.05, StreamSet(seed).system())
        assert abs(spectral_radius(params.a) - target) <= 1e-8
        assert params.a.shape == (5, 5)
        assert params.b.shape == (5, 3)
        assert params.c.shape == (3, 5)
    again = random_stable_system(5, 3, 0.55, 0.05, 0.05, StreamSet(1).system())
    assert np.array_equal(
        again.a, random_stable_system(5, 3, 0.55, 0.05, 0.05, StreamSet(1).system()).a
    )
    with pytest.raises(ValueError):
        random_stable_system(3, 2, 0.0, 0.01, 0.01, StreamSet(0).system())


# -- config parsing ----------------------------------------------------------

def test_parse_experiment_config(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# comment\n"
        "kind = estimation_sweep\n"
        "rho_grid = 0.1 0.9\n"
        "l_grid = 2 4\n"
        "h_grid = 50 100\n"
        "replicates = 3\n"
        "seed = 11\n"
    )
    cfg = parse_experiment_config(path)
    assert cfg.kind == "estimation_sweep"
    assert cfg.rho_grid == (0.1, 0.9)
    assert cfg.l_grid == (2, 4)
    assert cfg.replicates == 3
    over = parse_experiment_config(path, {"seed": 99, "out": "x.csv"})
    assert over.seed == 99 and over.out == "x.csv"
    path.write_text("kind = regret_sweep\nbogus_key = 1\n")
    with pytest.raises(ValueError):
        parse_experiment_config(path)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="unknown_thing")
    with pytest.raises(ValueError):
        ExperimentConfig(kind="pe_check", replicates=0)


# -- determinism and row bookkeeping ----------------------------------------

def strip_timestamp(path):
    lines = path.read_text().splitlines()
    return "\n".join(l for l in lines if not l.startswith("# timestamp"))


def drop_runtime(text):
    # runtime_ms is wall-clock and sits second to last in every schema
    out = []
    for line in text.splitlines():
        if line.startswith("#") or line.startswith("experiment"):
            out.append(line)
        else:
            head, _, status = line.rsplit(",", 2)
            out.append(head + "," + status)
    return "\n".join(out)


def test_regret_sweep_rows_and_determinism(tmp_path):
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_experiment(tiny_regret_cfg(out=str(out_a)))
    run_experiment(tiny_regret_cfg(out=str(out_b)))
    assert drop_runtime(strip_timestamp(out_a)) == drop_runtime(strip_timestamp(out_b))
    rows = read_rows(out_a)
    assert len(rows) == 2 * 2  # replicates x solvers
    assert {r["solver"] for r in rows} == {"sdp_gw", "sign_iter"}
    for row in rows:
        for key, value in row.items():
            if isinstance(value, float):
                assert np.isfinite(value)
        assert abs(row["regret"] - (row["r1"] + row["r2"] + row["r3"]) / 2.0) \
            <= 1e-9 * max(1.0, abs(row["regret"]))


def test_estimation_sweep_row_count(tmp_path):
    out = tmp_path / "est.csv"
    cfg = ExperimentConfig(
        kind="estimation_sweep", rho_grid=(0.5,), l_grid=(2,), h_grid=(40, 60),
        n=3, p=2, noise_w=0.02, noise_z=0.02, replicates=3, seed=2, out=str(out),
    )
    result = run_experiment(cfg)
    assert len(result.rows) == 1 * 1 * 2 * 3
    rows = read_rows(out)
    keys = [(r["rho"], r["L"], r["H"], r["seed"]) for r in rows]
    assert keys == sorted(keys)


def test_qubo_compare_rows(tmp_path):
    out = tmp_path / "q.csv"
    cfg = ExperimentConfig(
        kind="qubo_compare", t_grid=(5,), replicates=2, trials_grid=(1, 5),
        seed=3, out=str(out),
    )
    result = run_experiment(cfg)
    assert len(result.rows) == 2 * 2 * 2  # reps x solvers x trials
    for row in result.rows:
        assert row["value"] <= row["brute_value"] + 1e-9
        assert row["ratio"] <= 1.0 + 1e-12
    # best-of-r is nondecreasing in r within one (seed, solver)
    by_key = {}
    for row in result.rows:
        by_key.setdefault((row["seed"], row["solver"]), []).append((row["trials"], row["value"]))
    for pairs in by_key.values():
        pairs.sort()
        assert pairs[0][1] <= pairs[1][1] + 1e-12


def test_grid_search_single_cell_and_counts(tmp_path):
    cfg = ExperimentConfig(
        kind="grid_search", t0=60, c1_grid=(1.2,), c2_grid=(0.6,),
        replicates=2, seed=4, trials=16, out=str(tmp_path / "g.csv"),
    )
    result = run_experiment(cfg)
    assert result.best == (1.2, 0.6)
    assert len(result.rows) == 1 * 1 * 2


def test_grid_search_cell_cross_product():
    cfg = ExperimentConfig(
        kind="grid_search", t0=60, c1_grid=(1.0, 1.4), c2_grid=(0.5, 0.75),
        replicates=1, seed=4, trials=8,
    )
    result = run_experiment(cfg)
    assert len(result.rows) == 2 * 2


def test_grid_search_tie_rule():
    rows = [
        {"c1": 1.0, "c2": 0.5, "regret": 3.0, "status": "ok"},
        {"c1": 0.5, "c2": 2.0, "regret": 3.0, "status": "ok"},
        {"c1": 0.5, "c2": 1.0, "regret": 3.0, "status": "ok"},
        {"c1": 2.0, "c2": 0.1, "regret": 9.0, "status": "ok"},
    ]
    assert _select_best_cell(rows) == (0.5, 1.0)


def test_grid_search_rejects_empty_grid():
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig(kind="grid_search", c2_grid=(), t0=60))


def test_pe_check_fraction(tmp_path):
    cfg = ExperimentConfig(
        kind="pe_check", p=2, lag=2, horizon=600, replicates=20, seed=0,
        out=str(tmp_path / "pe.csv"),
    )
    result = run_experiment(cfg)
    assert result.summary["pe_fraction"] >= 0.9
    for row in result.rows:
        assert row["lambda_max"] <= row["lambda_max_bound"] + 1e-9


def test_parallel_workers_match_sequential(tmp_path):
    seq = run_experiment(tiny_regret_cfg())
    par = run_experiment(tiny_regret_cfg(workers=2))
    key = lambda r: (r["T"], r["seed"], r["solver"])
    for a, b in zip(sorted(seq.rows, key=key), sorted(par.rows, key=key)):
        for col in ("oracle_value", "policy_value", "regret", "r1", "r2", "r3", "epsilon"):
            assert a[col] == b[col]


def test_sequential_timeout_marks_rows():
    result = run_experiment(tiny_regret_cfg(timeout_s=1e-9))
    assert result.rows
    assert all(r["status"] == "timeout" for r in result.rows)
    for row in result.rows:
        for v in row.values():
            if isinstance(v, float):
                assert np.isfinite(v)


def test_write_read_roundtrip(tmp_path):
    rows = [
        {"experiment": "pe_check", "seed": 0, "p": 2, "L": 2, "H": 10,
         "lambda_min": 1.25, "lambda_max": 9.5, "pe_threshold": 2.0,
         "lambda_max_bound": 80.0, "pe_pass": 0, "runtime_ms": 1.5, "status": "ok"},
    ]
    path = tmp_path / "r.csv"
    write_rows(path, "pe_check", rows)
    back = read_rows(path)
    assert back == rows


# -- CLI ----------------------------------------------------------------------

def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "etcbandit.cli", *args],
        capture_output=True, text=True,
    )


def test_cli_qubo_matches_brute(tmp_path):
    g = rng(0)
    w = g.standard_normal((6, 6))
    w = 0.5 * (w + w.T)
    matrix = tmp_path / "w.txt"
    matrix.write_text("6\n" + "\n".join(" ".join(repr(float(v)) for v in row) for row in w) + "\n")
    out = tmp_path / "sol.csv"
    proc = run_cli("qubo", "--matrix", str(matrix), "--solver", "brute", "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    text = out.read_text().splitlines()
    value = float([l for l in text if l.startswith("# value:")][0].split(":")[1])
    signs = np.array([float(l.split(",")[1]) for l in text if "," in l and not l.startswith("index")])
    expect = brute_force_max(QuboProblem.from_dense(w))
    assert value == pytest.approx(expect.value, rel=1e-12)
    assert signs @ (0.5 * (w + w.T)) @ signs == pytest.approx(value, rel=1e-9)


def test_cli_simulate_and_estimate(tmp_path):
    out = tmp_path / "traj.csv"
    proc = run_cli("simulate", "--steps", "20", "--seed", "3", "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 22  # header + 21 rounds
    assert lines[0].startswith("t,u0,u1,x0")

    proc = run_cli("estimate", "--horizon", "200", "--lag", "2", "--seed", "1",
                   "--out", str(tmp_path / "ghat.csv"))
    assert proc.returncode == 0, proc.stderr
    assert "rel_error=" in proc.stdout


def test_cli_etc_run_and_pe(tmp_path):
    out = tmp_path / "run.csv"
    proc = run_cli("etc-run", "--t", "11", "--h", "4", "--lag", "2",
                   "--solver", "brute", "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    assert "regret=" in proc.stdout
    rows = read_rows(out)
    assert len(rows) == 1 and rows[0]["solver"] == "brute"

    proc = run_cli("pe-check", "--horizon", "120", "--replicates", "3")
    assert proc.returncode == 0
    assert "pe_fraction=" in proc.stdout


def test_cli_error_is_machine_readable(tmp_path):
    proc = run_cli("qubo", "--matrix", str(tmp_path / "missing.txt"))
    assert proc.returncode != 0
    line = [l for l in proc.stderr.splitlines() if l.startswith("ETCBANDIT-ERROR ")][0]
    payload = json.loads(line.split(" ", 1)[1])
    assert payload["command"] == "qubo"

    proc = run_cli("sweep")
    assert proc.returncode != 0
    assert "ETCBANDIT-ERROR" in proc.stderr


def test_cli_sweep_from_config(tmp_path):
    cfg_path = tmp_path / "sweep.cfg"
    cfg_path.write_text(
        "kind = estimation_sweep\nrho_grid = 0.5\nl_grid = 2\nh_grid = 40\n"
        "n = 3\np = 2\nnoise_w = 0.02\nnoise_z = 0.02\nreplicates = 2\n"
    )
    out = tmp_path / "sweep.csv"
    proc = run_cli("sweep", "--config", str(cfg_path), "--out", str(out), "--seed", "8")
    assert proc.returncode == 0, proc.stderr
    assert len(read_rows(out)) == 2
