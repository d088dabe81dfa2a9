"""Expected-reward quadratic forms.

With the action stack ordered latest-first, the expected cumulative
reward is a quadratic form in a strictly upper block-Toeplitz matrix M
whose (i, j) block is generator block j - i - 1. Everything downstream
(commit-phase objectives, regret terms) evaluates these forms, so the
class keeps the generator and works matrix-free; dense materialisation
is allowed only up to dimension 4096.
"""

import numpy as np

from .markov import MarkovParams

DENSE_LIMIT = 4096


def stack_actions(actions):
    """Time-ordered actions (h+1, p) -> stacked vector with the latest
    action in the leading block."""
    return np.flipud(np.atleast_2d(np.asarray(actions, dtype=float))).ravel()


def unstack_actions(stack, p):
    """Inverse of stack_actions: stacked vector -> (h+1, p) time order."""
    stack = np.asarray(stack, dtype=float).ravel()
    if stack.size % p:
        raise ValueError("stack length %d is not a multiple of %d" % (stack.size, p))
    return stack.reshape(-1, p)[::-1].copy()


class RewardQuadratic:
    """Block-Toeplitz reward form over rounds 0..horizon."""

    def __init__(self, blocks, horizon, p=None):
        if horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if isinstance(blocks, MarkovParams):
            blocks = blocks.blocks
        blocks = np.asarray(blocks, dtype=float)
        if blocks.ndim == 2:
            blocks = blocks[None]
        if blocks.size == 0:
            if blocks.ndim == 3 and blocks.shape[1] == blocks.shape[2]:
                p = p if p is not None else blocks.shape[1]
            elif p is None:
                raise ValueError("p is required when the generator is empty")
            blocks = np.zeros((0, p, p))
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("generator blocks must have shape (K, p, p)")
        if p is None:
            p = blocks.shape[1]
        if blocks.shape[1] != p:
            raise ValueError("generator block size %d != p=%d" % (blocks.shape[1], p))
        # Blocks beyond the horizon never enter the matrix; trailing
        # all-zero blocks only widen the band, so drop both.
        blocks = blocks[:horizon]
        used = blocks.shape[0]
        while used and not np.any(blocks[used - 1]):
            used -= 1
        self.blocks = blocks[:used].copy()
        self.horizon = int(horizon)
        self.p = int(p)

    @property
    def dim(self):
        return self.p * (self.horizon + 1)

    def __repr__(self):
        return "RewardQuadratic(horizon=%d, p=%d, nonzero_blocks=%d)" % (
            self.horizon, self.p, len(self.blocks))

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ValueError("stack has length %d, expected %d" % (x.shape[0], self.dim))
        return x

    def matvec_m(self, x):
        """M @ x for a stack vector or a (dim, batch) matrix."""
        x = self._check(x)
        batched = x.ndim > 1
        cols = x.reshape(self.horizon + 1, self.p, -1)
        out = np.zeros_like(cols)
        for k, g in enumerate(self.blocks):
            # block row i picks up g @ x_block[i + k + 1]
            out[: self.horizon - k] += np.einsum("ab,tbc->tac", g, cols[k + 1:])
        out = out.reshape(self.dim, -1)
        return out if batched else out[:, 0]

    def rmatvec_m(self, x):
        """M.T @ x."""
        x = self._check(x)
        batched = x.ndim > 1
        cols = x.reshape(self.horizon + 1, self.p, -1)
        out = np.zeros_like(cols)
        for k, g in enumerate(self.blocks):
            out[k + 1:] += np.einsum("ba,tbc->tac", g, cols[: self.horizon - k])
        out = out.reshape(self.dim, -1)
        return out if batched else out[:, 0]

    def matvec_s(self, x):
        """(M + M.T) @ x."""
        return self.matvec_m(x) + self.rmatvec_m(x)

    def quad_m(self, u):
        """u' M u; equals half of u' S u."""
        u = self._check(np.ravel(u))
        return float(u @ self.matvec_m(u))

    def quad_s(self, u):
        """u' (M + M') u."""
        return 2.0 * self.quad_m(u)

    def dense_m(self):
        if self.dim > DENSE_LIMIT:
            raise ValueError("dimension %d exceeds dense limit %d" % (self.dim, DENSE_LIMIT))
        p, h = self.p, self.horizon
        m = np.zeros((self.dim, self.dim))
        for k, g in enumerate(self.blocks):
            for i in range(h - k):
                m[i * p:(i + 1) * p, (i + k + 1) * p:(i + k + 2) * p] = g
        return m

    def dense_s(self):
        m = self.dense_m()
        return m + m.T


def build_reward_matrix(blocks, horizon):
    """Reward form from a generator (impulse-response blocks or a
    MarkovParams); missing blocks are zero."""
    return RewardQuadratic(blocks, horizon)


def build_estimated_s(est, horizon):
    """Reward form with estimated blocks below the lag and zeros beyond,
    matching the commit-phase objective."""
    return RewardQuadratic(est.blocks, horizon, p=est.p)


def expected_reward_quadratic(q, u_stack):
    """Expected cumulative reward of a stacked action sequence."""
    return q.quad_m(u_stack)
