"""Sign-vector quadratic maximisation: max s' W s over s in {-1, +1}^m.

Four routes with different guarantees and costs:

  * exhaustive search (meet-in-the-middle enumeration, m <= 26),
  * single-sweep vertex coordinate ascent for nonnegative-diagonal W,
  * the sign-iteration fixed-point heuristic,
  * a unit-diagonal semidefinite relaxation solved by low-rank
    column-wise ascent, rounded with random hyperplanes.

W is stored in symmetric banded form (row i holds the window
W[i, i-b..i+b]); reward forms built from impulse-response blocks are
narrow-banded, so the relaxation never touches a dense matrix.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import ascent_kernel
from .toeplitz import RewardQuadratic

BRUTE_FORCE_LIMIT = 26
GW_ALPHA = 0.87856


def _default_rng(rng):
    if rng is None:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(0)))
    return rng


class QuboProblem:
    """Symmetric quadratic-form objective in banded storage."""

    def __init__(self, band, half_bw):
        self.band = np.ascontiguousarray(band, dtype=float)
        self.half_bw = int(half_bw)
        self.m = self.band.shape[0]
        if self.band.shape[1] != 2 * self.half_bw + 1:
            raise ValueError("band storage width does not match half bandwidth")

    @classmethod
    def from_dense(cls, w):
        """Symmetrise a dense matrix ((W + W') / 2) and pack its band."""
        w = np.asarray(w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("W must be square")
        w = 0.5 * (w + w.T)
        m = w.shape[0]
        half = 0
        for d in range(m - 1, 0, -1):
            if np.any(np.diagonal(w, d)):
                half = d
                break
        band = np.zeros((m, 2 * half + 1))
        for d in range(-half, half + 1):
            diag = np.diagonal(w, d)
            rows = np.arange(max(0, -d), max(0, -d) + len(diag))
            band[rows, d + half] = diag
        return cls(band, half)

    @classmethod
    def from_quadratic(cls, q: RewardQuadratic, cutoff=1e-12):
        """Objective (u' S u) / 2 = u' M u of a reward form.

        Generator blocks whose norm falls below `cutoff` times the largest
        block are dropped; they sit far outside the solver tolerance and
        keeping them would blow up the bandwidth.
        """
        blocks = q.blocks
        p, h = q.p, q.horizon
        m = q.dim
        if len(blocks):
            norms = np.linalg.norm(blocks, axis=(1, 2))
            keep = np.nonzero(norms > cutoff * norms.max())[0]
            count = int(keep[-1]) + 1 if len(keep) else 0
        else:
            count = 0
        half = count * p + p - 1 if count else 0
        band = np.zeros((m, 2 * half + 1))
        for k in range(count):
            g = 0.5 * blocks[k]          # symmetric half of the S form
            repeats = h - k
            if repeats <= 0:
                continue
            base = np.arange(repeats) * p
            for a in range(p):
                for bcol in range(p):
                    v = g[a, bcol]
                    if v == 0.0:
                        continue
                    d = (k + 1) * p + bcol - a
                    band[base + a, half + d] = v
                    band[base + (k + 1) * p + bcol, half - d] = v
        return cls(band, half)

    # -- linear algebra on the band ------------------------------------

    def diagonal(self):
        return self.band[:, self.half_bw].copy()

    def matvec(self, x):
        """W @ x for a vector or (m, batch) matrix."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        xs = x.reshape(self.m, -1)
        out = np.zeros_like(xs)
        c = self.half_bw
        for d in range(-c, c + 1):
            lo, hi = max(0, -d), self.m - max(0, d)
            if hi <= lo:
                continue
            col = self.band[lo:hi, d + c]
            out[lo:hi] += col[:, None] * xs[lo + d:hi + d]
        return out[:, 0] if squeeze else out

    def quad(self, s):
        """s' W s, batched over columns when s is (m, batch)."""
        s = np.asarray(s, dtype=float)
        if s.ndim == 1:
            return float(s @ self.matvec(s))
        return np.einsum("mb,mb->b", s, self.matvec(s))

    def abs_sum(self):
        """Sum of |W_ij| over all entries."""
        return float(np.abs(self.band).sum())

    def dense(self):
        if self.m > 4096:
            raise ValueError("refusing to materialise dimension %d" % self.m)
        w = np.zeros((self.m, self.m))
        c = self.half_bw
        for d in range(-c, c + 1):
            lo, hi = max(0, -d), self.m - max(0, d)
            if hi <= lo:
                continue
            rows = np.arange(lo, hi)
            w[rows, rows + d] = self.band[lo:hi, d + c]
        return w


def as_problem(w):
    if isinstance(w, QuboProblem):
        return w
    if isinstance(w, RewardQuadratic):
        return QuboProblem.from_quadratic(w)
    return QuboProblem.from_dense(w)


@dataclass
class QuboSolution:
    assignment: np.ndarray
    value: float
    solver: str
    relaxation_value: Optional[float] = None
    factor: Optional[np.ndarray] = None     # (rank, m), unit columns
    gw_bound: Optional[float] = None
    converged: Optional[bool] = None


def _sign_rows(k):
    """All sign vectors of length k, ordered so the row index is the
    lexicographic rank with +1 sorting before -1."""
    if k == 0:
        return np.ones((1, 0))
    bits = (np.arange(2 ** k)[:, None] >> np.arange(k - 1, -1, -1)) & 1
    return 1.0 - 2.0 * bits


def brute_force_max(prob, chunk=512):
    """Exact maximum by enumerating half-assignments and scanning the
    cross terms; first (lexicographically smallest, +1-preferred)
    maximiser wins ties."""
    prob = as_problem(prob)
    m = prob.m
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError("refusing exhaustive search beyond m=%d" % BRUTE_FORCE_LIMIT)
    w = prob.dense()
    m1 = m // 2
    s1, s2 = _sign_rows(m1), _sign_rows(m - m1)
    q1 = np.einsum("ij,ij->i", s1 @ w[:m1, :m1], s1)
    q2 = np.einsum("ij,ij->i", s2 @ w[m1:, m1:], s2)
    cross = s1 @ (2.0 * w[:m1, m1:])
    best = -math.inf
    best_ij = (0, 0)
    for start in range(0, len(s1), chunk):
        stop = min(start + chunk, len(s1))
        vals = q1[start:stop, None] + cross[start:stop] @ s2.T + q2[None, :]
        flat = int(np.argmax(vals))
        top = float(vals.flat[flat])
        if top > best:
            best = top
            best_ij = (start + flat // len(s2), flat % len(s2))
    assignment = np.concatenate([s1[best_ij[0]], s2[best_ij[1]]])
    return QuboSolution(assignment=assignment, value=prob.quad(assignment), solver="brute")


def vertex_ascent(prob, x0):
    """Push an interior point to a vertex one coordinate at a time.

    Each coordinate's restriction is convex when the diagonal is
    nonnegative, so replacing it with the better endpoint (+1 on ties)
    never decreases the objective; one pass lands on a sign vector.
    """
    prob = as_problem(prob)
    diag = prob.diagonal()
    if np.any(diag < -1e-12):
        raise ValueError("vertex ascent requires a nonnegative diagonal")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (prob.m,):
        raise ValueError("start point has wrong dimension")
    if np.max(np.abs(x)) > 1.0 + 1e-12:
        raise ValueError("start point must lie in the unit cube")
    w = prob.dense() if prob.m <= 4096 else None
    q = prob.matvec(x)
    for k in range(prob.m):
        b_k = q[k] - diag[k] * x[k]
        s = 1.0 if b_k >= 0.0 else -1.0
        delta = s - x[k]
        if delta != 0.0:
            if w is not None:
                q += delta * w[:, k]
            else:
                x[k] = s
                q = prob.matvec(x)
                continue
            x[k] = s
    return QuboSolution(assignment=x, value=prob.quad(x), solver="vertex_ascent")


def sign_iterate_batch(prob, starts, max_iters):
    """Advance several sign-iteration chains at once.

    `starts` is (restarts, m); returns (ends, fixed) where ends is
    (m, restarts) and fixed marks chains that reached a fixed point.
    """
    prob = as_problem(prob)
    restarts = starts.shape[0]
    x = np.ascontiguousarray(np.asarray(starts, dtype=float).T)   # (m, restarts)
    active = np.ones(restarts, dtype=bool)
    fixed = np.zeros(restarts, dtype=bool)
    for _ in range(max_iters):
        if not np.any(active):
            break
        field = prob.matvec(x[:, active])
        cur = x[:, active]
        new = np.where(field > 0.0, 1.0, np.where(field < 0.0, -1.0, cur))
        settled = np.all(new == cur, axis=0)
        x[:, active] = new
        idx = np.nonzero(active)[0]
        fixed[idx[settled]] = True
        active[idx[settled]] = False
    return x, fixed


def sign_iteration(prob, restarts=30, max_iters=200, rng=None):
    """Fixed-point heuristic: repeatedly set each coordinate to the sign
    of its field (W s)_i, keeping the previous sign on zeros. Restarts
    run from independent random sign vectors; the best value wins."""
    prob = as_problem(prob)
    if restarts < 1:
        raise ValueError("need at least one restart")
    rng = _default_rng(rng)
    starts = 2.0 * rng.integers(0, 2, size=(restarts, prob.m)) - 1.0
    x, fixed = sign_iterate_batch(prob, starts, max_iters)
    values = prob.quad(x)
    best = int(np.argmax(values))
    return QuboSolution(
        assignment=x[:, best].copy(),
        value=float(values[best]),
        solver="sign_iter",
        converged=bool(fixed[best]),
    )


def default_rank(m):
    """Factor rank comfortably above the low-rank optimality threshold."""
    return int(math.ceil(math.sqrt(2.0 * m))) + 1


def solve_elliptope_sdp(prob, rank=None, tol=1e-7, max_sweeps=500, rng=None):
    """Unit-diagonal semidefinite relaxation by low-rank column ascent.

    Maintains unit vectors v_i and cycles v_i <- normalize(sum_j W_ij v_j)
    (diagonal excluded; zero fields leave the column untouched) until the
    objective gain per sweep drops below `tol` relative. Returns the
    factor, the relaxation value tr(W V'V), and a convergence flag.
    """
    prob = as_problem(prob)
    m = prob.m
    if rank is None:
        rank = default_rank(m)
    if rank < 2:
        raise ValueError("rank must be at least 2")
    rng = _default_rng(rng)
    v = rng.standard_normal((m, rank))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    value, sweeps, converged = ascent_kernel(prob.band, prob.half_bw, v, tol, max_sweeps)
    return v.T, float(value), bool(converged), int(sweeps)


def gw_round(factor, prob, trials=256, rng=None):
    """Random-hyperplane rounding of an elliptope factor.

    Each trial draws a standard normal direction and signs the column
    projections (zeros become +1); the best trial by objective value is
    returned, earliest trial winning ties.
    """
    prob = as_problem(prob)
    if trials < 1:
        raise ValueError("need at least one trial")
    factor = np.asarray(factor, dtype=float)
    rng = _default_rng(rng)
    dirs = rng.standard_normal((trials, factor.shape[0]))
    signs = np.where(dirs @ factor >= 0.0, 1.0, -1.0)     # (trials, m)
    values = prob.quad(signs.T)
    best = int(np.argmax(values))
    return QuboSolution(
        assignment=signs[best].copy(),
        value=float(values[best]),
        solver="sdp_gw",
        factor=factor,
    )


def gw_expected_value(factor, prob):
    """Closed-form expected rounded value: sum_ij W_ij (1 - 2/pi *
    arccos(v_i' v_j))."""
    prob = as_problem(prob)
    factor = np.asarray(factor, dtype=float)
    gram = np.clip(factor.T @ factor, -1.0, 1.0)
    agree = 1.0 - (2.0 / math.pi) * np.arccos(gram)
    return float(np.sum(prob.dense() * agree))


def gw_approx_bound(prob, relaxation_value):
    """Rounding-quality floor: alpha * relaxation - (1 - alpha) * sum|W|."""
    prob = as_problem(prob)
    return GW_ALPHA * relaxation_value - (1.0 - GW_ALPHA) * prob.abs_sum()


def solve_sdp_gw(prob, trials=256, rank=None, tol=1e-7, max_sweeps=500, rng=None):
    """Relax, round, and assemble a solution with its certificates."""
    prob = as_problem(prob)
    rng = _default_rng(rng)
    factor, relax, converged, _ = solve_elliptope_sdp(
        prob, rank=rank, tol=tol, max_sweeps=max_sweeps, rng=rng
    )
    sol = gw_round(factor, prob, trials=trials, rng=rng)
    sol.relaxation_value = relax
    sol.gw_bound = gw_approx_bound(prob, relax)
    sol.converged = converged
    return sol
