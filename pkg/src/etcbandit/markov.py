"""Markov-parameter regression from action-reward pairs.

The reward at time t is linear in vec(G) against the Kronecker covariate
u_bar_{t-1} (x) u_t, where G stacks the first L impulse-response blocks
C A^k B side by side and u_bar collects the L most recent past actions.
Least squares over t = L+1..H recovers G; the gram matrix of covariates
carries the excitation diagnostics.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# Worst-case fourth moment of the Kronecker sign covariates over unit
# directions; exposed read-only for tests and the excitation bound.
FOURTH_MOMENT_BOUND = 9.0


@dataclass(frozen=True)
class MarkovParams:
    """L impulse-response blocks, each p x p (block k maps the action k+1
    steps back to the current reward)."""

    blocks: np.ndarray          # (L, p, p)
    provenance: str = "true"    # "true" | "estimated"
    rank_deficient: bool = False

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=float)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("blocks must have shape (L, p, p)")
        blocks = blocks.copy()
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def lag(self):
        return self.blocks.shape[0]

    @property
    def p(self):
        return self.blocks.shape[1]

    @property
    def flat(self):
        """(p, p*L) layout with block k in columns k*p..(k+1)*p-1."""
        return np.hstack(list(self.blocks))

    @classmethod
    def from_flat(cls, flat, p, lag, **kw):
        flat = np.asarray(flat, dtype=float).reshape(p, p * lag)
        blocks = np.stack([flat[:, k * p:(k + 1) * p] for k in range(lag)])
        return cls(blocks, **kw)

    def save_csv(self, path):
        """Export block-major, row-major within block."""
        with open(path, "w") as fh:
            fh.write("block,row,col,value\n")
            for k in range(self.lag):
                for i in range(self.p):
                    for j in range(self.p):
                        fh.write("%d,%d,%d,%s\n" % (k, i, j, repr(float(self.blocks[k, i, j]))))


def true_markov(params, lag):
    """First `lag` impulse-response blocks of the plant, by repeated
    multiplication: block k = C A^k B."""
    if lag < 1:
        raise ValueError("lag must be at least 1")
    blocks = np.empty((lag, params.p, params.p))
    left = np.array(params.c)
    for k in range(lag):
        blocks[k] = left @ params.b
        left = left @ params.a
    return MarkovParams(blocks, provenance="true")


@dataclass(frozen=True)
class CovariateSet:
    """Kronecker covariates for rounds t = L+1..H plus their gram matrix."""

    rows: np.ndarray        # (H - L, p^2 L)
    gram: np.ndarray        # (p^2 L, p^2 L)
    responses: np.ndarray   # (H - L,)
    p: int
    lag: int

    @property
    def d(self):
        return self.p * self.p * self.lag

    def moment(self):
        """Right-hand side of the normal equations, sum_t r_t * row_t."""
        return self.rows.T @ self.responses


def build_covariates(actions, rewards, lag):
    """Assemble regression rows: row for round t is the Kronecker product
    of the stacked past actions (u_{t-1}, ..., u_{t-L}) with u_t."""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    rewards = np.asarray(rewards, dtype=float).ravel()
    if len(rewards) != actions.shape[0]:
        raise ValueError("actions and rewards must have equal length")
    if lag < 1:
        raise ValueError("lag must be at least 1")
    horizon = actions.shape[0] - 1
    if horizon < lag + 1:
        raise ValueError(
            "need at least %d rounds for lag %d, got %d" % (lag + 2, lag, horizon + 1)
        )
    p = actions.shape[1]
    count = horizon - lag
    past = np.empty((count, p * lag))
    for k in range(1, lag + 1):
        past[:, (k - 1) * p:k * p] = actions[lag + 1 - k:horizon + 1 - k]
    current = actions[lag + 1:horizon + 1]
    rows = np.einsum("sj,si->sji", past, current).reshape(count, -1)
    return CovariateSet(
        rows=rows,
        gram=rows.T @ rows,
        responses=rewards[lag + 1:horizon + 1].copy(),
        p=p,
        lag=lag,
    )


def estimate_markov(cov, p, lag):
    """Least-squares estimate of the impulse-response blocks.

    Uses the exact symmetric solve when the gram matrix is well
    conditioned and a pseudo-inverse (singular values below
    1e-10 * lambda_max dropped) otherwise, so the under-determined
    regime still returns the minimum-norm solution.
    """
    if cov.p != p or cov.lag != lag:
        raise ValueError("covariates were built with p=%d, lag=%d" % (cov.p, cov.lag))
    w, q = np.linalg.eigh(cov.gram)
    lam_max = float(w[-1]) if len(w) else 0.0
    cutoff = 1e-10 * max(lam_max, 0.0)
    keep = w > cutoff
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    vec = q @ (inv * (q.T @ cov.moment()))
    flat = vec.reshape(p, p * lag, order="F")
    return MarkovParams.from_flat(
        flat, p, lag, provenance="estimated", rank_deficient=bool(np.any(~keep))
    )


def excitation_min_eig(cov):
    """Smallest eigenvalue of the covariate gram matrix."""
    return float(np.linalg.eigvalsh(cov.gram)[0])


def sample_complexity(p, lag, delta):
    """Rounds (beyond the lag) sufficient for persistent excitation with
    probability 1 - delta:

        N = 32 * (L+1) * 9 * ( log(2(L+1)/delta) + p^2 L log(1 + 16 p^2 L) ).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if p < 1 or lag < 1:
        raise ValueError("dimensions must be positive")
    d = p * p * lag
    n = 32.0 * (lag + 1) * FOURTH_MOMENT_BOUND * (
        math.log(2.0 * (lag + 1) / delta) + d * math.log(1.0 + 16.0 * d)
    )
    return int(math.ceil(n))


def fourth_moment_check(p, lag, directions, samples, rng):
    """Monte Carlo probe of the covariate fourth moment.

    Returns the largest estimate of E[(v' u_tilde)^4] over random unit
    directions v; the true value never exceeds 9 for sign covariates.
    """
    if directions < 1 or samples < 1:
        raise ValueError("directions and samples must be positive")
    d = p * p * lag
    draws = 2.0 * rng.integers(0, 2, size=(samples, (lag + 1) * p)) - 1.0
    current = draws[:, :p]
    past = draws[:, p:]
    covs = np.einsum("sj,si->sji", past, current).reshape(samples, d)
    worst = 0.0
    for _ in range(directions):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        worst = max(worst, float(np.mean((covs @ v) ** 4)))
    return worst


class EstimationError(NamedTuple):
    frobenius: float
    relative: float


def estimation_error(est, truth):
    """Frobenius distance between two block sequences, absolute and
    relative to the truth (0/0 reported as 0)."""
    if est.blocks.shape != truth.blocks.shape:
        raise ValueError("block shapes differ: %s vs %s" % (est.blocks.shape, truth.blocks.shape))
    fro = float(np.linalg.norm(est.blocks - truth.blocks))
    denom = float(np.linalg.norm(truth.blocks))
    if fro == 0.0:
        return EstimationError(0.0, 0.0)
    return EstimationError(fro, fro / denom if denom > 0 else math.inf)
