"""Explore-then-commit policy and its regret accounting.

Phase one plays random sign actions for rounds 0..H and fits the
impulse-response blocks from the observed rewards; phase two builds the
estimated reward form over the remaining rounds, solves the sign-vector
maximisation with the configured solver, and plays the result.

Regret is measured in expected value (quadratic forms under the true
parameters) against a solver-labelled oracle sequence, and splits into
three terms: the horizon truncation gap, the optimisation gap between
true and estimated forms, and the estimation error seen through the
played actions.
"""

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import qubo
from .markov import MarkovParams, build_covariates, estimate_markov, estimation_error, true_markov
from .systems import SystemParams, sample_rademacher_actions, stability_profile, Trajectory
from .toeplitz import RewardQuadratic, build_estimated_s, build_reward_matrix, stack_actions, unstack_actions

COMMIT_SOLVERS = ("sdp_gw", "sign_iter", "brute")


def exploration_length(t, c1):
    """Schedule H = round(c1 * T^(2/3))."""
    return int(round(c1 * t ** (2.0 / 3.0)))


def truncation_length(t, c2):
    """Schedule L = max(1, round(c2 * log T))."""
    return max(1, int(round(c2 * math.log(t))))


@dataclass(frozen=True)
class EtcConfig:
    t: int
    h: int
    lag: int
    commit_solver: str = "sdp_gw"
    trials: int = 256
    restarts: int = 30
    sign_max_iters: int = 200
    sdp_tol: float = 1e-7
    sdp_max_sweeps: int = 500
    sdp_rank: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.h < self.t:
            raise ValueError("need 0 <= H < T")
        if not 1 <= self.lag <= self.h:
            raise ValueError("need 1 <= L <= H")
        if self.h - self.lag < 1:
            raise ValueError("need H - L >= 1")
        if self.commit_solver not in COMMIT_SOLVERS:
            raise ValueError("unknown commit solver %r" % (self.commit_solver,))

    @classmethod
    def from_schedule(cls, t, c1, c2, **kw):
        return cls(t=t, h=exploration_length(t, c1), lag=truncation_length(t, c2), **kw)


def solve_sign_problem(prob, solver, *, trials=256, restarts=30, max_iters=200,
                       tol=1e-7, max_sweeps=500, rank=None, rng=None):
    """Dispatch a sign-vector maximisation to one of the solver routes."""
    if solver == "brute":
        return qubo.brute_force_max(prob)
    if solver == "sign_iter":
        return qubo.sign_iteration(prob, restarts=restarts, max_iters=max_iters, rng=rng)
    if solver == "sdp_gw":
        return qubo.solve_sdp_gw(
            prob, trials=trials, rank=rank, tol=tol, max_sweeps=max_sweeps, rng=rng
        )
    raise ValueError("unknown solver %r" % (solver,))


def oracle_actions(s: RewardQuadratic, solver="sdp_gw", rng=None, **knobs):
    """Maximise the expected cumulative reward form over sign stacks and
    report the achieved value under the exact form."""
    sol = solve_sign_problem(qubo.as_problem(s), solver, rng=rng, **knobs)
    sol.value = s.quad_m(sol.assignment)
    return sol


@dataclass
class EtcRunRecord:
    trajectory: Trajectory
    estimated: MarkovParams
    commit_actions: np.ndarray          # stacked, latest first
    realized_total_reward: float
    expected_commit_value: float
    commit_solution: qubo.QuboSolution
    config: EtcConfig
    timings: dict = field(default_factory=dict)


def run_etc(params: SystemParams, cfg: EtcConfig, streams):
    """One full explore-then-commit run on a live simulator.

    All noise is drawn up front from the stream set, so the realisation
    does not depend on the commit solver's choices and paired solver
    comparisons see identical randomness.
    """
    t_total, h, lag = cfg.t, cfg.h, cfg.lag
    n, p = params.n, params.p
    tic = time.perf_counter()

    sqw = params.noise_sqrt()
    w = streams.process().standard_normal((t_total, n)) @ sqw.T if np.any(sqw) \
        else np.zeros((t_total, n))
    z = params.sigma_z * streams.reward().standard_normal(t_total + 1) \
        if params.sigma_z > 0 else np.zeros(t_total + 1)

    explore = sample_rademacher_actions(p, h + 1, streams.actions())
    states = np.zeros((t_total + 1, n))
    rewards = np.empty(t_total + 1)
    x = np.zeros(n)
    for t in range(h + 1):
        states[t] = x
        rewards[t] = explore[t] @ (params.c @ x) + z[t]
        x = params.a @ x + params.b @ explore[t] + w[t]
    t_explore = time.perf_counter()

    cov = build_covariates(explore, rewards[: h + 1], lag)
    estimated = estimate_markov(cov, p, lag)
    t_estimate = time.perf_counter()

    s_hat = build_estimated_s(estimated, t_total - h - 1)
    commit_sol = solve_sign_problem(
        qubo.as_problem(s_hat),
        cfg.commit_solver,
        trials=cfg.trials,
        restarts=cfg.restarts,
        max_iters=cfg.sign_max_iters,
        tol=cfg.sdp_tol,
        max_sweeps=cfg.sdp_max_sweeps,
        rank=cfg.sdp_rank,
        rng=streams.rounding(child=0),
    )
    u_pi = commit_sol.assignment
    commit_actions = unstack_actions(u_pi, p)
    t_solve = time.perf_counter()

    actions = np.vstack([explore, commit_actions])
    for t in range(h + 1, t_total + 1):
        states[t] = x
        rewards[t] = actions[t] @ (params.c @ x) + z[t]
        if t < t_total:
            x = params.a @ x + params.b @ actions[t] + w[t]
    t_done = time.perf_counter()

    trajectory = Trajectory(
        actions=actions,
        states=states,
        rewards=rewards,
        process_noise=w,
        reward_noise=z,
        noise_seed=getattr(streams, "key", (cfg.seed, 0)),
    )
    return EtcRunRecord(
        trajectory=trajectory,
        estimated=estimated,
        commit_actions=u_pi,
        realized_total_reward=float(np.sum(rewards)),
        expected_commit_value=s_hat.quad_m(u_pi),
        commit_solution=commit_sol,
        config=cfg,
        timings={
            "explore_s": t_explore - tic,
            "estimate_s": t_estimate - t_explore,
            "solve_s": t_solve - t_estimate,
            "total_s": t_done - tic,
        },
    )


class RegretTerms(NamedTuple):
    r1: float
    r2: float
    r3: float


def regret_decomposition(s_full, s_sub, s_hat, u_star, u_tilde, u_pi):
    """Three-term regret split.

    r1 = u*' S_full u* - u~' S_sub u~      (horizon truncation)
    r2 = u~' S_sub u~ - upi' S_hat upi     (true vs estimated optimisation)
    r3 = upi' (S_hat - S_sub) upi          (estimation error on the play)

    (r1 + r2 + r3) / 2 telescopes to the expected regret.
    """
    if len(u_tilde) != s_sub.dim or len(u_pi) != s_sub.dim or s_hat.dim != s_sub.dim:
        raise ValueError("commit-phase dimensions are inconsistent")
    a = s_full.quad_s(u_star)
    b = s_sub.quad_s(u_tilde)
    c = s_hat.quad_s(u_pi)
    d = s_sub.quad_s(u_pi)
    return RegretTerms(r1=a - b, r2=b - c, r3=c - d)


class TheoreticalBounds(NamedTuple):
    bound_r1: float
    bound_r23: float


def theoretical_bounds(params, rho, h, lag, t, epsilon):
    """Closed-form ceilings for the regret terms.

    With kappa = max(|B|, |C|) and phi the power-decay constant at rate
    rho: the truncation term is at most 2 p kappa^2 (alpha H + beta) with
    alpha = 1 + phi rho / (1 - rho), beta = phi rho / (1 - rho)^2 + 1;
    the other two are at most 2 p (T - H) (eps + kappa^2 gamma) with
    gamma = phi rho^L / (1 - rho).
    """
    if epsilon < 0:
        raise ValueError("estimation error must be nonnegative")
    prof = stability_profile(params, rho)
    phi, kappa = prof.phi, prof.kappa
    p = params.p
    alpha = 1.0 + phi * rho / (1.0 - rho)
    beta = phi * rho / (1.0 - rho) ** 2 + 1.0
    bound_r1 = 2.0 * p * kappa ** 2 * (alpha * h + beta)
    gamma = phi * rho ** lag / (1.0 - rho)
    bound_r23 = 2.0 * p * (t - h) * (epsilon + kappa ** 2 * gamma)
    return TheoreticalBounds(bound_r1, bound_r23)


@dataclass
class RegretReport:
    oracle_value: float
    policy_value: float
    regret: float
    r1: float
    r2: float
    r3: float
    bound_r1: float
    bound_r23: float
    epsilon: float
    oracle_solver: str
    commit_solver: str


def evaluate_regret(params, record, *, oracle=None, u_tilde_solution=None,
                    rho=None, rng_tilde=None, rng_oracle=None):
    """Score a finished run against the oracle benchmark.

    The oracle and the true-parameter commit optimum are solved with the
    run's solver configuration unless precomputed solutions are supplied;
    their provenance is recorded rather than claiming global optimality.
    """
    cfg = record.config
    t_total, h, lag = cfg.t, cfg.h, cfg.lag
    truth = true_markov(params, max(t_total, 1))
    s_full = build_reward_matrix(truth, t_total)
    s_sub = build_reward_matrix(truth, t_total - h - 1)
    s_hat = build_estimated_s(record.estimated, t_total - h - 1)

    knobs = dict(
        trials=cfg.trials,
        restarts=cfg.restarts,
        max_iters=cfg.sign_max_iters,
        tol=cfg.sdp_tol,
        max_sweeps=cfg.sdp_max_sweeps,
        rank=cfg.sdp_rank,
    )
    if oracle is None:
        oracle = oracle_actions(s_full, cfg.commit_solver, rng=rng_oracle, **knobs)
    if u_tilde_solution is None:
        u_tilde_solution = solve_sign_problem(
            qubo.as_problem(s_sub), cfg.commit_solver, rng=rng_tilde, **knobs
        )

    u_star = oracle.assignment
    u_tilde = u_tilde_solution.assignment
    u_pi = record.commit_actions
    terms = regret_decomposition(s_full, s_sub, s_hat, u_star, u_tilde, u_pi)

    oracle_value = s_full.quad_m(u_star)
    policy_value = s_sub.quad_m(u_pi)
    eps = estimation_error(record.estimated, true_markov(params, lag)).frobenius
    rho = rho if rho is not None else 0.5 * (1.0 + params.rho)
    bounds = theoretical_bounds(params, rho, h, lag, t_total, eps)
    return RegretReport(
        oracle_value=oracle_value,
        policy_value=policy_value,
        regret=oracle_value - policy_value,
        r1=terms.r1,
        r2=terms.r2,
        r3=terms.r3,
        bound_r1=bounds.bound_r1,
        bound_r23=bounds.bound_r23,
        epsilon=eps,
        oracle_solver=oracle.solver,
        commit_solver=record.commit_solution.solver,
    )
