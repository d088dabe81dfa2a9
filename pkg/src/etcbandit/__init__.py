"""Explore-then-commit for bandits with latent linear dynamics."""

from ._kernels import BACKEND as kernel_backend
from .etc import (
    EtcConfig,
    EtcRunRecord,
    RegretReport,
    evaluate_regret,
    exploration_length,
    oracle_actions,
    regret_decomposition,
    run_etc,
    theoretical_bounds,
    truncation_length,
)
from .experiments import (
    ExperimentConfig,
    demo_system,
    grid_search,
    random_stable_system,
    run_experiment,
)
from .markov import (
    CovariateSet,
    MarkovParams,
    build_covariates,
    estimate_markov,
    estimation_error,
    excitation_min_eig,
    fourth_moment_check,
    sample_complexity,
    true_markov,
)
from .qubo import (
    QuboProblem,
    QuboSolution,
    brute_force_max,
    gw_approx_bound,
    gw_expected_value,
    gw_round,
    sign_iteration,
    solve_elliptope_sdp,
    solve_sdp_gw,
    vertex_ascent,
)
from .rng import StreamSet, stream
from .systems import (
    StabilityProfile,
    SystemParams,
    Trajectory,
    load_system,
    sample_rademacher_actions,
    save_system,
    simulate_trajectory,
    stability_profile,
)
from .toeplitz import (
    RewardQuadratic,
    build_estimated_s,
    build_reward_matrix,
    expected_reward_quadratic,
    stack_actions,
    unstack_actions,
)

__version__ = "0.1.0"
