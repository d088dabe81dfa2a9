import itertools
import math

import numpy as np
import pytest

from etcbandit import (
    QuboProblem,
    brute_force_max,
    build_reward_matrix,
    gw_approx_bound,
    gw_expected_value,
    gw_round,
    sign_iteration,
    solve_elliptope_sdp,
    solve_sdp_gw,
    vertex_ascent,
)
from etcbandit._kernels import pyref
from etcbandit.qubo import GW_ALPHA, as_problem, default_rank, sign_iterate_batch

from conftest import random_symmetric, rng

try:
    from etcbandit._kernels._ascent import ascent as compiled_ascent
except ImportError:
    compiled_ascent = None


def naive_max(w):
    """Exhaustive reference with the same tie rule (+1 first, lexicographic)."""
    m = len(w)
    best_val, best_s = -math.inf, None
    for bits in itertools.product((1.0, -1.0), repeat=m):
        s = np.array(bits)
        val = s @ w @ s
        if val > best_val:
            best_val, best_s = val, s
    return best_val, best_s


# -- banded storage ----------------------------------------------------------

def test_problem_symmetrises_and_matches_dense():
    w = rng(0).standard_normal((7, 7))
    prob = QuboProblem.from_dense(w)
    sym = 0.5 * (w + w.T)
    assert np.allclose(prob.dense(), sym, atol=1e-15)
    x = rng(1).standard_normal(7)
    assert np.allclose(prob.matvec(x), sym @ x, atol=1e-12)
    batch = rng(1).standard_normal((7, 4))
    assert np.allclose(prob.matvec(batch), sym @ batch, atol=1e-12)
    assert prob.quad(x) == pytest.approx(x @ sym @ x, rel=1e-12)
    assert prob.abs_sum() == pytest.approx(np.abs(sym).sum(), rel=1e-12)


def test_problem_from_quadratic_halves_symmetrised_form():
    blocks = rng(2).standard_normal((2, 2, 2))
    q = build_reward_matrix(blocks, 5)
    prob = as_problem(q)
    assert np.allclose(prob.dense(), q.dense_s() / 2.0, atol=1e-15)
    u = rng(3).choice([-1.0, 1.0], size=prob.m)
    assert prob.quad(u) == pytest.approx(q.quad_m(u), rel=1e-12)


# -- exhaustive search -------------------------------------------------------

def test_brute_force_examples():
    swap = brute_force_max(QuboProblem.from_dense([[0.0, 1.0], [1.0, 0.0]]))
    assert swap.value == 2.0
    assert np.array_equal(swap.assignment, [1.0, 1.0])

    zero = brute_force_max(QuboProblem.from_dense(np.zeros((3, 3))))
    assert zero.value == 0.0
    assert np.array_equal(zero.assignment, np.ones(3))

    for w11 in (0.7, -0.4):
        single = brute_force_max(QuboProblem.from_dense([[w11]]))
        assert single.value == pytest.approx(w11, abs=1e-15)
        assert single.assignment[0] == 1.0


def test_brute_force_matches_naive_enumeration():
    for seed in range(20):
        m = int(rng(seed).integers(2, 9))
        w = random_symmetric(m, 1000 + seed)
        sol = brute_force_max(QuboProblem.from_dense(w))
        val, s = naive_max(w)
        assert sol.value == pytest.approx(val, rel=1e-12)
        assert np.array_equal(sol.assignment, s)


def test_brute_force_size_guard():
    with pytest.raises(ValueError):
        brute_force_max(QuboProblem.from_dense(np.zeros((27, 27))))


def test_solution_value_recomputes():
    w = random_symmetric(9, 5)
    prob = QuboProblem.from_dense(w)
    for sol in (
        brute_force_max(prob),
        sign_iteration(prob, restarts=5, rng=rng(1)),
        solve_sdp_gw(prob, trials=20, rng=rng(2)),
        vertex_ascent(as_problem(w - np.diag(np.diag(w)) + 2 * np.eye(9)), np.zeros(9)),
    ):
        direct = sol.assignment @ (
            prob.dense() if sol.solver != "vertex_ascent" else
            0.5 * ((w - np.diag(np.diag(w)) + 2 * np.eye(9)) + (w - np.diag(np.diag(w)) + 2 * np.eye(9)).T)
        ) @ sol.assignment
        assert abs(sol.value - direct) <= 1e-9 * (1.0 + abs(sol.value))


# -- vertex ascent -----------------------------------------------------------

def test_vertex_ascent_examples():
    prob = QuboProblem.from_dense(np.eye(2))
    sol = vertex_ascent(prob, np.zeros(2))
    assert sol.value == 2.0
    assert set(np.unique(sol.assignment)) <= {-1.0, 1.0}


def test_vertex_ascent_from_vertex_never_decreases():
    for seed in range(20):
        w = np.abs(np.diag(rng(seed).standard_normal(6))) + random_symmetric(6, seed) ** 2 * 0
        w = random_symmetric(6, seed)
        np.fill_diagonal(w, np.abs(np.diag(w)))
        prob = QuboProblem.from_dense(w)
        x0 = rng(200 + seed).choice([-1.0, 1.0], size=6)
        start_val = prob.quad(x0)
        sol = vertex_ascent(prob, x0)
        assert sol.value >= start_val - 1e-12
        assert set(np.unique(sol.assignment)) <= {-1.0, 1.0}


def test_vertex_ascent_precondition_errors():
    neg = QuboProblem.from_dense(np.array([[-1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        vertex_ascent(neg, np.zeros(2))
    ok = QuboProblem.from_dense(np.eye(2))
    with pytest.raises(ValueError):
        vertex_ascent(ok, np.array([1.5, 0.0]))


# -- sign iteration ----------------------------------------------------------

def test_sign_iteration_fixed_point_property():
    for seed in range(10):
        w = random_symmetric(8, 3000 + seed)
        prob = QuboProblem.from_dense(w)
        sol = sign_iteration(prob, restarts=10, rng=rng(seed))
        if sol.converged:
            field = prob.matvec(sol.assignment)
            mask = field != 0.0
            assert np.array_equal(np.sign(field[mask]), sol.assignment[mask])


def test_sign_iteration_feasible_below_brute():
    for seed in range(20):
        w = random_symmetric(10, 4000 + seed)
        prob = QuboProblem.from_dense(w)
        best = brute_force_max(prob).value
        sol = sign_iteration(prob, restarts=10, rng=rng(seed))
        assert sol.value <= best + 1e-9


def test_sign_iteration_more_restarts_never_hurt():
    hits_single, hits_many = 0, 0
    for seed in range(50):
        w = random_symmetric(8, 5000 + seed)
        prob = QuboProblem.from_dense(w)
        best = brute_force_max(prob).value
        lone = sign_iteration(prob, restarts=1, max_iters=200, rng=rng(777 + seed))
        many = sign_iteration(prob, restarts=30, max_iters=200, rng=rng(777 + seed))
        assert many.value >= lone.value - 1e-12  # shared start pool prefix
        hits_single += lone.value >= best - 1e-9
        hits_many += many.value >= best - 1e-9
    assert hits_many >= hits_single


def test_sign_iteration_monotone_on_psd():
    for seed in range(10):
        g = rng(6000 + seed).standard_normal((8, 8))
        w = g @ g.T
        prob = QuboProblem.from_dense(w)
        x = rng(seed).choice([-1.0, 1.0], size=8)
        prev = prob.quad(x)
        for _ in range(50):
            field = prob.matvec(x)
            x = np.where(field > 0, 1.0, np.where(field < 0, -1.0, x))
            cur = prob.quad(x)
            assert cur >= prev - 1e-9
            prev = cur


def test_sign_iterate_batch_shapes():
    prob = QuboProblem.from_dense(random_symmetric(6, 1))
    starts = rng(4).choice([-1.0, 1.0], size=(5, 6))
    ends, fixed = sign_iterate_batch(prob, starts, 100)
    assert ends.shape == (6, 5)
    assert fixed.shape == (5,)
    assert set(np.unique(ends)) <= {-1.0, 1.0}


# -- semidefinite relaxation + rounding --------------------------------------

def test_sdp_trivial_cases():
    single = QuboProblem.from_dense([[1.5]])
    factor, value, converged, _ = solve_elliptope_sdp(single, rng=rng(0))
    assert value == pytest.approx(1.5, abs=1e-9)
    assert np.linalg.norm(factor[:, 0]) == pytest.approx(1.0, abs=1e-12)

    swap = QuboProblem.from_dense([[0.0, 1.0], [1.0, 0.0]])
    _, value, converged, _ = solve_elliptope_sdp(swap, rng=rng(1))
    assert converged
    assert value == pytest.approx(2.0, abs=1e-6)


def test_sdp_rank_validation():
    with pytest.raises(ValueError):
        solve_elliptope_sdp(QuboProblem.from_dense(np.eye(3)), rank=1)


def test_relaxation_dominates_brute():
    for seed in range(100):
        m = int(rng(seed).integers(2, 13))
        w = random_symmetric(m, 7000 + seed)
        prob = QuboProblem.from_dense(w)
        best = brute_force_max(prob).value
        _, relax, _, _ = solve_elliptope_sdp(prob, tol=1e-9, max_sweeps=20000, rng=rng(seed))
        assert best <= relax + 1e-6


def test_factor_columns_unit_and_value_consistent():
    w = random_symmetric(10, 42)
    prob = QuboProblem.from_dense(w)
    factor, value, _, _ = solve_elliptope_sdp(prob, rng=rng(9))
    norms = np.linalg.norm(factor, axis=0)
    assert np.allclose(norms, 1.0, atol=1e-12)
    gram = factor.T @ factor
    assert value == pytest.approx(np.sum(prob.dense() * gram), rel=1e-9)


def test_gw_round_rank_one_recovers_signs():
    g = rng(13)
    direction = g.standard_normal(4)
    direction /= np.linalg.norm(direction)
    pattern = g.choice([-1.0, 1.0], size=6)
    factor = np.outer(direction, pattern)      # columns all +-direction
    w = random_symmetric(6, 77)
    prob = QuboProblem.from_dense(w)
    expect = pattern @ prob.dense() @ pattern
    for trials in (1, 8):
        sol = gw_round(factor, prob, trials=trials, rng=rng(5))
        assert sol.value == pytest.approx(expect, rel=1e-12)
        assert np.array_equal(sol.assignment, pattern) or np.array_equal(sol.assignment, -pattern)


def test_gw_round_feasible_below_brute():
    for seed in range(20):
        w = random_symmetric(9, 8000 + seed)
        prob = QuboProblem.from_dense(w)
        best = brute_force_max(prob).value
        sol = solve_sdp_gw(prob, trials=30, rng=rng(seed))
        assert sol.value <= best + 1e-9
        assert sol.relaxation_value >= sol.value - 1e-6 * (1.0 + abs(sol.value))


def test_gw_round_prefix_monotone_in_trials():
    w = random_symmetric(8, 99)
    prob = QuboProblem.from_dense(w)
    factor, _, _, _ = solve_elliptope_sdp(prob, rng=rng(3))
    few = gw_round(factor, prob, trials=5, rng=rng(71))
    many = gw_round(factor, prob, trials=20, rng=rng(71))
    assert many.value >= few.value


def test_gw_expected_value_closed_forms():
    w = random_symmetric(5, 123)
    prob = QuboProblem.from_dense(w)
    ones = np.vstack([np.ones(5), np.zeros(5)])          # identical unit columns
    assert gw_expected_value(ones, prob) == pytest.approx(prob.dense().sum(), rel=1e-12)
    ortho = np.eye(5)                                    # pairwise orthogonal
    assert gw_expected_value(ortho, prob) == pytest.approx(np.trace(prob.dense()), rel=1e-12)

    swap = QuboProblem.from_dense([[0.0, 1.0], [1.0, 0.0]])
    half = np.array([[1.0, 0.5], [0.0, math.sqrt(3) / 2]])   # inner product 1/2
    assert gw_expected_value(half, swap) == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_gw_expected_matches_monte_carlo():
    for seed in range(3):
        m = 8
        w = random_symmetric(m, 880 + seed)
        prob = QuboProblem.from_dense(w)
        factor, _, _, _ = solve_elliptope_sdp(prob, rng=rng(seed))
        expect = gw_expected_value(factor, prob)
        g = rng(9300 + seed)
        dirs = g.standard_normal((10 ** 5, factor.shape[0]))
        signs = np.where(dirs @ factor >= 0.0, 1.0, -1.0)
        vals = prob.quad(signs.T)
        se = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
        assert abs(float(np.mean(vals)) - expect) <= 4.0 * se


def test_gw_bound_examples():
    zero = QuboProblem.from_dense(np.zeros((3, 3)))
    assert gw_approx_bound(zero, 0.0) == 0.0
    swap = QuboProblem.from_dense([[0.0, 1.0], [1.0, 0.0]])
    assert gw_approx_bound(swap, 2.0) == pytest.approx(4.0 * GW_ALPHA - 2.0, abs=1e-12)
    assert gw_approx_bound(swap, 2.0) == pytest.approx(1.51424, abs=1e-5)


def test_gw_expected_above_bound():
    for seed in range(100):
        m = int(rng(seed).integers(2, 13))
        w = random_symmetric(m, 11000 + seed)
        prob = QuboProblem.from_dense(w)
        factor, relax, _, _ = solve_elliptope_sdp(prob, tol=1e-9, max_sweeps=20000, rng=rng(seed))
        assert gw_expected_value(factor, prob) >= gw_approx_bound(prob, relax) - 1e-6


def test_vertex_optimum_dominates_interior_samples():
    for seed in range(20):
        m = int(rng(seed).integers(2, 9))
        w = random_symmetric(m, 12000 + seed)
        np.fill_diagonal(w, np.abs(np.diag(w)))
        prob = QuboProblem.from_dense(w)
        best = brute_force_max(prob).value
        g = rng(13000 + seed)
        points = g.uniform(-1.0, 1.0, size=(200, m))
        vals = np.einsum("ij,ij->i", points @ prob.dense(), points)
        assert best >= np.max(vals) - 1e-9
        start = points[int(np.argmax(vals))]
        sol = vertex_ascent(prob, start)
        assert sol.value >= np.max(vals) - 1e-12


@pytest.mark.skipif(compiled_ascent is None, reason="compiled kernel unavailable")
def test_kernels_agree():
    for seed in range(10):
        m = int(rng(seed).integers(3, 40))
        w = random_symmetric(m, 14000 + seed)
        prob = QuboProblem.from_dense(w)
        r = default_rank(m)
        g = rng(15000 + seed)
        v0 = g.standard_normal((m, r))
        v0 /= np.linalg.norm(v0, axis=1, keepdims=True)
        va, vb = v0.copy(), v0.copy()
        val_c, sweeps_c, conv_c = compiled_ascent(prob.band, prob.half_bw, va, 1e-9, 5000)
        val_p, sweeps_p, conv_p = pyref.ascent(prob.band, prob.half_bw, vb, 1e-9, 5000)
        assert val_c == pytest.approx(val_p, rel=1e-8, abs=1e-8)
        assert conv_c and conv_p
