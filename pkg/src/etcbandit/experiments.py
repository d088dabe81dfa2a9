"""Seeded, CSV-emitting experiment harness.

Five experiment kinds: regret sweeps over the horizon, estimation-error
sweeps over exploration length and lag, solver-vs-exhaustive comparisons
on small instances, schedule-constant grid search, and excitation checks.
Rows are deterministic functions of the config (replicates fan out over
counter-based streams), so re-running a config reproduces the CSV byte
for byte apart from the timestamp line.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field, fields as dc_fields
from datetime import datetime, timezone

import numpy as np

from . import qubo
from .etc import (
    EtcConfig,
    evaluate_regret,
    exploration_length,
    oracle_actions,
    run_etc,
    truncation_length,
)
from .markov import build_covariates, estimate_markov, estimation_error, true_markov
from .rng import StreamSet
from .systems import SystemParams, load_system, sample_rademacher_actions, simulate_trajectory, spectral_radius
from .toeplitz import build_reward_matrix
from .qubo import brute_force_max, solve_elliptope_sdp

SCHEMA_VERSION = "etcbandit-results v1"

KINDS = ("regret_sweep", "estimation_sweep", "qubo_compare", "grid_search", "pe_check")

COLUMNS = {
    "regret_sweep": [
        "experiment", "seed", "T", "H", "L", "solver", "oracle_value",
        "own_oracle_value", "policy_value", "regret", "r1", "r2", "r3",
        "epsilon", "runtime_ms", "status",
    ],
    "estimation_sweep": [
        "experiment", "seed", "rho", "L", "H", "rel_error", "runtime_ms", "status",
    ],
    "qubo_compare": [
        "experiment", "seed", "T", "solver", "trials", "value", "brute_value",
        "ratio", "runtime_ms", "status",
    ],
    "grid_search": [
        "experiment", "seed", "c1", "c2", "T", "H", "L", "regret", "runtime_ms", "status",
    ],
    "pe_check": [
        "experiment", "seed", "p", "L", "H", "lambda_min", "lambda_max",
        "pe_threshold", "lambda_max_bound", "pe_pass", "runtime_ms", "status",
    ],
}

SORT_KEYS = {
    "regret_sweep": ("T", "seed", "solver"),
    "estimation_sweep": ("rho", "L", "H", "seed"),
    "qubo_compare": ("T", "seed", "solver", "trials"),
    "grid_search": ("c1", "c2", "seed"),
    "pe_check": ("H", "seed"),
}


def demo_system():
    """Small diagonal reference plant used throughout the docs and the
    regret experiments."""
    a = np.diag([0.3, 0.15, 0.12])
    b = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.4]])
    c = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.3]])
    return SystemParams(a, b, c, (0.01 ** 2) * np.eye(3), 0.01)


def random_stable_system(n, p, target_rho, noise_w, noise_z, rng):
    """Dense random plant with the state transition rescaled to an exact
    spectral radius; entries are N(0, 1/n) (and N(0, 1/p) for the reward
    form). Degenerate zero-radius draws are retried."""
    if not 0.0 < target_rho < 1.0:
        raise ValueError("target spectral radius must lie in (0, 1)")
    for _ in range(100):
        a = rng.standard_normal((n, n)) / math.sqrt(n)
        radius = spectral_radius(a)
        if radius > 0.0:
            break
    else:
        raise RuntimeError("could not draw a usable transition matrix")
    a = a * (target_rho / radius)
    b = rng.standard_normal((n, p)) / math.sqrt(n)
    c = rng.standard_normal((p, n)) / math.sqrt(p)
    return SystemParams(a, b, c, (noise_w ** 2) * np.eye(n), noise_z)


@dataclass
class ExperimentConfig:
    kind: str = "regret_sweep"
    experiment: str = ""
    # system source: "demo", "random", or a path to a system config file
    system: str = "demo"
    n: int = 3
    p: int = 2
    target_rho: float = 0.5
    noise_w: float = 0.01
    noise_z: float = 0.01
    # schedules / grids
    t_grid: tuple = (200, 400, 600, 800, 1000, 1200, 1500)
    c1: float = 0.4817
    c2: float = 0.75
    t0: int = 1500
    c1_grid: tuple = ()
    c2_grid: tuple = (0.75, 1.0, 1.25)
    rho_grid: tuple = (0.1, 0.9)
    l_grid: tuple = (6, 12, 18, 30, 50)
    h_grid: tuple = tuple(range(100, 2001, 100))
    lag: int = 2
    horizon: int = 2000
    # replication and solver knobs
    replicates: int = 20
    seed: int = 0
    solver: str = "sdp_gw"
    benchmark_solver: str = "sdp_gw"
    trials: int = 256
    trials_grid: tuple = (1, 10, 30)
    restarts: int = 30
    sign_max_iters: int = 200
    sdp_tol: float = 1e-7
    sdp_max_sweeps: int = 500
    # execution
    workers: int = 1
    timeout_s: float = 0.0
    out: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError("unknown experiment kind %r" % (self.kind,))
        if self.replicates < 1:
            raise ValueError("replicate count must be at least 1")
        if not self.experiment:
            self.experiment = self.kind
        if not self.c1_grid:
            self.c1_grid = tuple(
                round(self.t0 ** e, 12) for e in (-0.1, -0.05, -0.02, 0.0, 0.02, 0.05, 0.1)
            )

    def resolve_system(self, rng=None):
        if self.system == "demo":
            return demo_system()
        if self.system == "random":
            if rng is None:
                raise ValueError("random system requested without a stream")
            return random_stable_system(
                self.n, self.p, self.target_rho, self.noise_w, self.noise_z, rng
            )
        return load_system(self.system)


# ---------------------------------------------------------------------------
# config file parsing

_INT_KEYS = {"n", "p", "t0", "lag", "horizon", "replicates", "seed", "trials",
             "restarts", "sign_max_iters", "sdp_max_sweeps", "workers"}
_FLOAT_KEYS = {"target_rho", "noise_w", "noise_z", "c1", "c2", "sdp_tol", "timeout_s"}
_INT_TUPLE_KEYS = {"t_grid", "l_grid", "h_grid", "trials_grid"}
_FLOAT_TUPLE_KEYS = {"c1_grid", "c2_grid", "rho_grid"}


def parse_experiment_config(path, overrides=None):
    """Read `key = value` lines (grids are space-separated) and apply
    CLI overrides on top."""
    raw = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError("%s:%d: expected 'key = value'" % (path, line_no))
            key, value = stripped.split("=", 1)
            raw[key.strip().lower()] = value.strip()
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dc_fields(ExperimentConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ValueError("unknown config key %r" % key)
        if isinstance(value, str):
            if key in _INT_KEYS:
                value = int(value)
            elif key in _FLOAT_KEYS:
                value = float(value)
            elif key in _INT_TUPLE_KEYS:
                value = tuple(int(v) for v in value.split())
            elif key in _FLOAT_TUPLE_KEYS:
                value = tuple(float(v) for v in value.split())
        kwargs[key] = value
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# per-replicate task bodies (module level so worker processes can import them)

def _etc_knobs(cfg):
    return dict(
        trials=cfg.trials,
        restarts=cfg.restarts,
        max_iters=cfg.sign_max_iters,
        tol=cfg.sdp_tol,
        max_sweeps=cfg.sdp_max_sweeps,
        rank=None,
    )


def _regret_task(params, cfg, t, rep, rep_index, solvers):
    streams = StreamSet(cfg.seed, rep_index)
    h = exploration_length(t, cfg.c1)
    lag = truncation_length(t, cfg.c2)
    s_full = build_reward_matrix(true_markov(params, t), t)
    oracle = oracle_actions(
        s_full, cfg.benchmark_solver, rng=streams.rounding(child=1), **_etc_knobs(cfg)
    )
    rows = []
    for si, solver in enumerate(solvers):
        tic = time.perf_counter()
        run_cfg = EtcConfig(
            t=t, h=h, lag=lag, commit_solver=solver,
            trials=cfg.trials, restarts=cfg.restarts, sign_max_iters=cfg.sign_max_iters,
            sdp_tol=cfg.sdp_tol, sdp_max_sweeps=cfg.sdp_max_sweeps, seed=cfg.seed,
        )
        record = run_etc(params, run_cfg, streams)
        report = evaluate_regret(
            params, record, oracle=oracle, rng_tilde=streams.rounding(child=2 + si)
        )
        if solver == cfg.benchmark_solver:
            own_value = report.oracle_value
        else:
            own = oracle_actions(
                s_full, solver, rng=streams.rounding(child=10 + si), **_etc_knobs(cfg)
            )
            own_value = own.value
        rows.append({
            "experiment": cfg.experiment, "seed": rep, "T": t, "H": h, "L": lag,
            "solver": solver, "oracle_value": report.oracle_value,
            "own_oracle_value": own_value,
            "policy_value": report.policy_value, "regret": report.regret,
            "r1": report.r1, "r2": report.r2, "r3": report.r3,
            "epsilon": report.epsilon,
            "runtime_ms": 1000.0 * (time.perf_counter() - tic), "status": "ok",
        })
    return rows


def _estimation_task(cfg, rho, rep, rep_index):
    streams = StreamSet(cfg.seed, rep_index)
    params = random_stable_system(
        cfg.n, cfg.p, rho, cfg.noise_w, cfg.noise_z, streams.system()
    )
    h_max = max(cfg.h_grid)
    actions = sample_rademacher_actions(cfg.p, h_max + 1, streams.actions())
    traj = simulate_trajectory(params, actions, streams)
    rows = []
    for lag in cfg.l_grid:
        truth = true_markov(params, lag)
        for h in cfg.h_grid:
            if h < lag + 1:
                continue
            tic = time.perf_counter()
            cov = build_covariates(actions[: h + 1], traj.rewards[: h + 1], lag)
            est = estimate_markov(cov, cfg.p, lag)
            rel = estimation_error(est, truth).relative
            rows.append({
                "experiment": cfg.experiment, "seed": rep, "rho": rho, "L": lag,
                "H": h, "rel_error": rel,
                "runtime_ms": 1000.0 * (time.perf_counter() - tic), "status": "ok",
            })
    return rows


def _qubo_task(cfg, t, rep, rep_index):
    streams = StreamSet(cfg.seed, rep_index)
    params = random_stable_system(
        cfg.n, cfg.p, cfg.target_rho, cfg.noise_w, cfg.noise_z, streams.system()
    )
    s_full = build_reward_matrix(true_markov(params, t), t)
    prob = qubo.as_problem(s_full)
    tic = time.perf_counter()
    brute_value = brute_force_max(prob).value
    r_max = max(cfg.trials_grid)

    factor, _, _, _ = solve_elliptope_sdp(
        prob, tol=cfg.sdp_tol, max_sweeps=cfg.sdp_max_sweeps, rng=streams.rounding(child=1)
    )
    dirs = streams.rounding(child=2).standard_normal((r_max, factor.shape[0]))
    signs = np.where(dirs @ factor >= 0.0, 1.0, -1.0)
    gw_best = np.maximum.accumulate(prob.quad(signs.T))

    starts = 2.0 * streams.rounding(child=3).integers(0, 2, size=(r_max, prob.m)) - 1.0
    ends, _ = qubo.sign_iterate_batch(prob, starts, cfg.sign_max_iters)
    si_best = np.maximum.accumulate(prob.quad(ends))
    runtime = 1000.0 * (time.perf_counter() - tic)

    rows = []
    for solver, best in (("sdp_gw", gw_best), ("sign_iter", si_best)):
        for r in cfg.trials_grid:
            value = float(best[r - 1])
            rows.append({
                "experiment": cfg.experiment, "seed": rep, "T": t, "solver": solver,
                "trials": r, "value": value, "brute_value": brute_value,
                "ratio": value / brute_value if brute_value != 0 else 1.0,
                "runtime_ms": runtime, "status": "ok",
            })
    return rows


def _grid_task(params, cfg, rep, rep_index, cells):
    streams = StreamSet(cfg.seed, rep_index)
    t0 = cfg.t0
    s_full = build_reward_matrix(true_markov(params, t0), t0)
    oracle = oracle_actions(
        s_full, cfg.benchmark_solver, rng=streams.rounding(child=1), **_etc_knobs(cfg)
    )
    oracle_value = oracle.value
    rows = []
    for ci, (c1, c2) in enumerate(cells):
        tic = time.perf_counter()
        run_cfg = EtcConfig(
            t=t0,
            h=exploration_length(t0, c1),
            lag=truncation_length(t0, c2),
            commit_solver=cfg.solver,
            trials=cfg.trials, restarts=cfg.restarts, sign_max_iters=cfg.sign_max_iters,
            sdp_tol=cfg.sdp_tol, sdp_max_sweeps=cfg.sdp_max_sweeps, seed=cfg.seed,
        )
        record = run_etc(params, run_cfg, streams)
        truth = true_markov(params, t0)
        s_sub = build_reward_matrix(truth, t0 - run_cfg.h - 1)
        regret = oracle_value - s_sub.quad_m(record.commit_actions)
        rows.append({
            "experiment": cfg.experiment, "seed": rep, "c1": c1, "c2": c2,
            "T": t0, "H": run_cfg.h, "L": run_cfg.lag, "regret": regret,
            "runtime_ms": 1000.0 * (time.perf_counter() - tic), "status": "ok",
        })
    return rows


def _pe_task(cfg, rep, rep_index):
    streams = StreamSet(cfg.seed, rep_index)
    tic = time.perf_counter()
    actions = sample_rademacher_actions(cfg.p, cfg.horizon + 1, streams.actions())
    cov = build_covariates(actions, np.zeros(cfg.horizon + 1), cfg.lag)
    eigs = np.linalg.eigvalsh(cov.gram)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    threshold = (cfg.horizon - cfg.lag) / 4.0
    rows = [{
        "experiment": cfg.experiment, "seed": rep, "p": cfg.p, "L": cfg.lag,
        "H": cfg.horizon, "lambda_min": lam_min, "lambda_max": lam_max,
        "pe_threshold": threshold,
        "lambda_max_bound": cov.d * (cfg.horizon - cfg.lag),
        "pe_pass": int(lam_min >= threshold),
        "runtime_ms": 1000.0 * (time.perf_counter() - tic), "status": "ok",
    }]
    return rows


def _run_task(bundle):
    fn, args, _skeleton = bundle
    return fn(*args)


def _timeout_rows(bundle):
    _fn, _args, skeleton = bundle
    out = []
    for row in skeleton:
        row = dict(row)
        row["status"] = "timeout"
        out.append(row)
    return out


def _skeleton(kind, cfg, **fixed):
    row = {col: 0 for col in COLUMNS[kind]}
    row["experiment"] = cfg.experiment
    row["status"] = "timeout"
    row.update(fixed)
    return row


# ---------------------------------------------------------------------------
# planning, execution, CSV emission

def _plan(cfg):
    tasks = []
    if cfg.kind == "regret_sweep":
        params = cfg.resolve_system(StreamSet(cfg.seed, 0).system())
        solvers = ("sdp_gw", "sign_iter")
        for ti, t in enumerate(cfg.t_grid):
            for rep in range(cfg.replicates):
                rep_index = ti * cfg.replicates + rep
                skel = [_skeleton(cfg.kind, cfg, seed=rep, T=t, solver=s) for s in solvers]
                tasks.append((_regret_task, (params, cfg, t, rep, rep_index, solvers), skel))
    elif cfg.kind == "estimation_sweep":
        for ri, rho in enumerate(cfg.rho_grid):
            for rep in range(cfg.replicates):
                rep_index = ri * cfg.replicates + rep
                skel = [_skeleton(cfg.kind, cfg, seed=rep, rho=rho)]
                tasks.append((_estimation_task, (cfg, rho, rep, rep_index), skel))
    elif cfg.kind == "qubo_compare":
        for ti, t in enumerate(cfg.t_grid):
            for rep in range(cfg.replicates):
                rep_index = ti * cfg.replicates + rep
                skel = [_skeleton(cfg.kind, cfg, seed=rep, T=t, solver=s, trials=r)
                        for s in ("sdp_gw", "sign_iter") for r in cfg.trials_grid]
                tasks.append((_qubo_task, (cfg, t, rep, rep_index), skel))
    elif cfg.kind == "grid_search":
        if not cfg.c1_grid or not cfg.c2_grid:
            raise ValueError("grid search needs nonempty c1 and c2 grids")
        cells = sorted((c1, c2) for c1 in cfg.c1_grid for c2 in cfg.c2_grid)
        for c1, c2 in cells:  # report schedule problems before any compute
            EtcConfig(
                t=cfg.t0,
                h=exploration_length(cfg.t0, c1),
                lag=truncation_length(cfg.t0, c2),
                commit_solver=cfg.solver,
            )
        params = cfg.resolve_system(StreamSet(cfg.seed, 0).system())
        for rep in range(cfg.replicates):
            skel = [_skeleton(cfg.kind, cfg, seed=rep, c1=c1, c2=c2) for c1, c2 in cells]
            tasks.append((_grid_task, (params, cfg, rep, rep, cells), skel))
    elif cfg.kind == "pe_check":
        for rep in range(cfg.replicates):
            skel = [_skeleton(cfg.kind, cfg, seed=rep, p=cfg.p, L=cfg.lag, H=cfg.horizon)]
            tasks.append((_pe_task, (cfg, rep, rep), skel))
    return tasks


def _execute(tasks, workers, timeout_s):
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(pool.submit(_run_task, t), t) for t in tasks]
            for future, bundle in futures:
                try:
                    rows.extend(future.result(timeout=timeout_s or None))
                except (FutureTimeout, TimeoutError):
                    rows.extend(_timeout_rows(bundle))
        return rows
    for bundle in tasks:
        tic = time.perf_counter()
        got = _run_task(bundle)
        if timeout_s and (time.perf_counter() - tic) > timeout_s:
            for row in got:
                row["status"] = "timeout"
        rows.extend(got)
    return rows


def _format_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_rows(path, kind, rows):
    columns = COLUMNS[kind]
    key_cols = SORT_KEYS[kind]
    rows = sorted(rows, key=lambda r: tuple(r[k] for k in key_cols))
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    with open(path, "w") as fh:
        fh.write("# timestamp: %s\n" % stamp)
        fh.write("# schema: %s kind=%s\n" % (SCHEMA_VERSION, kind))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_value(row[c]) for c in columns) + "\n")
    return path


def read_rows(path):
    """Parse a results CSV back into a list of dicts (strings preserved,
    numerics converted)."""
    rows = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            values = []
            for v in line.split(","):
                try:
                    values.append(int(v))
                except ValueError:
                    try:
                        values.append(float(v))
                    except ValueError:
                        values.append(v)
            rows.append(dict(zip(header, values)))
    return rows


@dataclass
class ExperimentResult:
    kind: str
    rows: list
    path: str = ""
    best: tuple = ()
    summary: dict = field(default_factory=dict)


def run_experiment(cfg):
    """Execute a config end to end; returns the rows plus kind-specific
    summaries (best grid cell, excitation pass fraction)."""
    tasks = _plan(cfg)
    rows = _execute(tasks, cfg.workers, cfg.timeout_s)
    result = ExperimentResult(kind=cfg.kind, rows=rows)
    if cfg.kind == "grid_search":
        result.best = _select_best_cell(rows)
        result.summary["best_c1"], result.summary["best_c2"] = result.best
    if cfg.kind == "pe_check":
        ok = [r for r in rows if r["status"] == "ok"]
        result.summary["pe_fraction"] = (
            sum(r["pe_pass"] for r in ok) / len(ok) if ok else 0.0
        )
    if cfg.out:
        result.path = write_rows(cfg.out, cfg.kind, rows)
    return result


def _select_best_cell(rows):
    """Mean regret per cell; ties prefer the smaller c1, then smaller c2."""
    cells = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        cells.setdefault((row["c1"], row["c2"]), []).append(row["regret"])
    best, best_mean = None, math.inf
    for cell in sorted(cells):
        mean = float(np.mean(cells[cell]))
        if mean < best_mean:
            best, best_mean = cell, mean
    if best is None:
        raise ValueError("grid search produced no usable cells")
    return best


def grid_search(cfg):
    """Run the schedule-constant search and return (c1, c2)."""
    if cfg.kind != "grid_search":
        raise ValueError("config kind must be grid_search")
    return run_experiment(cfg).best
