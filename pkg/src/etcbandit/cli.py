"""Command-line entry points.

Every subcommand exits 0 on success; failures print one machine-readable
line `ETCBANDIT-ERROR {json}` to stderr and exit nonzero.
"""

import argparse
import json
import sys

import numpy as np

from . import qubo
from .etc import EtcConfig, evaluate_regret, exploration_length, run_etc, truncation_length
from .experiments import (
    ExperimentConfig,
    demo_system,
    parse_experiment_config,
    run_experiment,
    write_rows,
)
from .markov import build_covariates, estimate_markov, estimation_error, excitation_min_eig, true_markov
from .rng import StreamSet
from .systems import load_system, sample_rademacher_actions, simulate_trajectory


def _system_from(args):
    if getattr(args, "config", None):
        return load_system(args.config)
    return demo_system()


def read_matrix_file(path):
    """Plain-text matrix: first token is the dimension m, followed by
    m*m row-major entries (whitespace or newline separated)."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens:
        raise ValueError("matrix file %s is empty" % path)
    m = int(tokens[0])
    values = [float(v) for v in tokens[1:]]
    if len(values) != m * m:
        raise ValueError("expected %d entries after the dimension, got %d" % (m * m, len(values)))
    return np.array(values).reshape(m, m)


def _cmd_simulate(args):
    params = _system_from(args)
    streams = StreamSet(args.seed)
    actions = sample_rademacher_actions(params.p, args.steps + 1, streams.actions())
    traj = simulate_trajectory(params, actions, streams)
    lines = ["t," + ",".join("u%d" % i for i in range(params.p))
             + "," + ",".join("x%d" % i for i in range(params.n)) + ",r"]
    for t in range(args.steps + 1):
        lines.append("%d,%s,%s,%s" % (
            t,
            ",".join(repr(float(v)) for v in traj.actions[t]),
            ",".join(repr(float(v)) for v in traj.states[t]),
            repr(float(traj.rewards[t])),
        ))
    _emit(args.out, lines)
    return 0


def _cmd_estimate(args):
    params = _system_from(args)
    streams = StreamSet(args.seed)
    actions = sample_rademacher_actions(params.p, args.horizon + 1, streams.actions())
    traj = simulate_trajectory(params, actions, streams)
    cov = build_covariates(actions, traj.rewards, args.lag)
    est = estimate_markov(cov, params.p, args.lag)
    err = estimation_error(est, true_markov(params, args.lag))
    print("lambda_min=%r rank_deficient=%s rel_error=%r" % (
        excitation_min_eig(cov), est.rank_deficient, err.relative))
    if args.out:
        est.save_csv(args.out)
    return 0


def _cmd_etc_run(args):
    params = _system_from(args)
    t = args.t
    h = args.h if args.h is not None else exploration_length(t, args.c1)
    lag = args.lag if args.lag is not None else truncation_length(t, args.c2)
    cfg = EtcConfig(t=t, h=h, lag=lag, commit_solver=args.solver, seed=args.seed)
    streams = StreamSet(args.seed)
    record = run_etc(params, cfg, streams)
    report = evaluate_regret(params, record, rng_oracle=streams.rounding(child=1),
                             rng_tilde=streams.rounding(child=2))
    row = {
        "experiment": "etc-run", "seed": args.seed, "T": t, "H": h, "L": lag,
        "solver": args.solver, "oracle_value": report.oracle_value,
        "own_oracle_value": report.oracle_value,
        "policy_value": report.policy_value, "regret": report.regret,
        "r1": report.r1, "r2": report.r2, "r3": report.r3, "epsilon": report.epsilon,
        "runtime_ms": 1000.0 * record.timings["total_s"], "status": "ok",
    }
    print("regret=%r oracle=%r policy=%r realized=%r" % (
        report.regret, report.oracle_value, report.policy_value,
        record.realized_total_reward))
    if args.out:
        write_rows(args.out, "regret_sweep", [row])
    return 0


def _cmd_qubo(args):
    w = read_matrix_file(args.matrix)
    prob = qubo.QuboProblem.from_dense(w)
    rng = StreamSet(args.seed).rounding()
    if args.solver == "brute":
        sol = qubo.brute_force_max(prob)
    elif args.solver == "sign_iter":
        sol = qubo.sign_iteration(prob, restarts=args.restarts, rng=rng)
    else:
        sol = qubo.solve_sdp_gw(prob, trials=args.trials, rng=rng)
    lines = [
        "# schema: etcbandit-qubo v1",
        "# solver: %s" % sol.solver,
        "# value: %r" % sol.value,
    ]
    if sol.relaxation_value is not None:
        lines.append("# relaxation_value: %r" % sol.relaxation_value)
        lines.append("# gw_bound: %r" % sol.gw_bound)
    lines.append("index,sign")
    for i, s in enumerate(sol.assignment):
        lines.append("%d,%d" % (i, int(s)))
    _emit(args.out, lines)
    return 0


def _experiment_cfg(args, kind):
    overrides = {
        "kind": kind,
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "out": getattr(args, "out", None),
        "replicates": getattr(args, "replicates", None),
    }
    if getattr(args, "config", None):
        return parse_experiment_config(args.config, overrides)
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    return ExperimentConfig(**kwargs)


def _cmd_benchmark(args):
    cfg = _experiment_cfg(args, "qubo_compare")
    result = run_experiment(cfg)
    print("rows=%d out=%s" % (len(result.rows), result.path or "-"))
    return 0


def _cmd_grid_search(args):
    cfg = _experiment_cfg(args, "grid_search")
    result = run_experiment(cfg)
    print("best_c1=%r best_c2=%r" % result.best)
    return 0


def _cmd_sweep(args):
    if not args.config:
        raise ValueError("sweep requires --config with a kind field")
    cfg = parse_experiment_config(args.config, {
        "seed": args.seed, "workers": args.workers, "out": args.out,
    })
    result = run_experiment(cfg)
    print("rows=%d out=%s" % (len(result.rows), result.path or "-"))
    return 0


def _cmd_pe_check(args):
    cfg = ExperimentConfig(
        kind="pe_check", p=args.p, lag=args.lag, horizon=args.horizon,
        replicates=args.replicates, seed=args.seed or 0, out=args.out or "",
    )
    result = run_experiment(cfg)
    print("pe_fraction=%r" % result.summary["pe_fraction"])
    return 0


def _emit(out, lines):
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="etcbandit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_help):
        p.add_argument("--config", help=config_help)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="")

    p = sub.add_parser("simulate", help="roll out the plant under random sign actions")
    common(p, "system config file (default: built-in demo system)")
    p.add_argument("--steps", type=int, default=50)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("estimate", help="exploration phase plus least-squares fit")
    common(p, "system config file")
    p.add_argument("--horizon", type=int, default=500)
    p.add_argument("--lag", type=int, default=4)
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("etc-run", help="one explore-then-commit run with regret report")
    common(p, "system config file")
    p.add_argument("--t", type=int, default=200)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--lag", type=int, default=None)
    p.add_argument("--c1", type=float, default=0.4817)
    p.add_argument("--c2", type=float, default=0.75)
    p.add_argument("--solver", choices=("sdp_gw", "sign_iter", "brute"), default="sdp_gw")
    p.set_defaults(fn=_cmd_etc_run)

    p = sub.add_parser("qubo", help="solve a sign-vector quadratic maximisation")
    p.add_argument("--matrix", required=True, help="matrix file: dimension line then row-major entries")
    p.add_argument("--solver", choices=("brute", "sign_iter", "sdp_gw"), default="sdp_gw")
    p.add_argument("--trials", type=int, default=256)
    p.add_argument("--restarts", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(fn=_cmd_qubo)

    for name, fn, help_text in (
        ("benchmark", _cmd_benchmark, "solver quality against exhaustive search"),
        ("grid-search", _cmd_grid_search, "search the schedule constants"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p, "experiment config file")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--replicates", type=int, default=None)
        p.set_defaults(fn=fn)

    p = sub.add_parser("sweep", help="run a regret or estimation sweep from a config")
    common(p, "experiment config file (required)")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("pe-check", help="excitation eigenvalue check")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--lag", type=int, default=2)
    p.add_argument("--horizon", type=int, default=2000)
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(fn=_cmd_pe_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # CLI boundary: report and exit nonzero
        payload = {"error": str(exc), "type": type(exc).__name__, "command": args.command}
        print("ETCBANDIT-ERROR %s" % json.dumps(payload), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
