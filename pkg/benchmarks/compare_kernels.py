"""Time the compiled elliptope-ascent kernel against the numpy fallback.

Run:  python benchmarks/compare_kernels.py [--sizes 200 800 2000] [--sweeps 30]

Both backends execute the same column updates; values agree to roundoff,
so the table reports the speed ratio and the relative value gap.
"""

import argparse
import time

import numpy as np

from etcbandit import QuboProblem, build_reward_matrix, demo_system, true_markov
from etcbandit._kernels import BACKEND, pyref

try:
    from etcbandit._kernels._ascent import ascent as compiled_ascent
except ImportError:
    compiled_ascent = None


def make_problem(horizon):
    system = demo_system()
    quad = build_reward_matrix(true_markov(system, horizon), horizon)
    return QuboProblem.from_quadratic(quad)


def run(kernel, prob, rank, sweeps, seed=7):
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal((prob.m, rank))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    tic = time.perf_counter()
    value, done, _ = kernel(prob.band, prob.half_bw, v, 0.0, sweeps)
    return value, done, time.perf_counter() - tic


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1000])
    parser.add_argument("--sweeps", type=int, default=30)
    parser.add_argument("--rank", type=int, default=0, help="0 = default rank")
    args = parser.parse_args()

    if compiled_ascent is None:
        print("compiled kernel unavailable (imported backend: %s)" % BACKEND)
        return
    print("%8s %6s %6s %10s %10s %8s %12s" % (
        "horizon", "m", "rank", "numpy_s", "cython_s", "speedup", "value_gap"))
    for horizon in args.sizes:
        prob = make_problem(horizon)
        rank = args.rank or int(np.ceil(np.sqrt(2 * prob.m))) + 1
        val_py, _, t_py = run(pyref.ascent, prob, rank, args.sweeps)
        val_cy, _, t_cy = run(compiled_ascent, prob, rank, args.sweeps)
        gap = abs(val_py - val_cy) / max(1.0, abs(val_py))
        print("%8d %6d %6d %10.3f %10.3f %8.1fx %12.2e" % (
            horizon, prob.m, rank, t_py, t_cy, t_py / t_cy, gap))


if __name__ == "__main__":
    main()
