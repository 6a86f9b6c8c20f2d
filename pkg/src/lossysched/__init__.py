"""Optimal sensor scheduling for linear-Gaussian plants over lossy networks.

Solves finite-horizon, discounted, and average-cost scheduling problems on
the error-covariance decision process, simulates the closed loop, and maps
stabilizable loss-rate regions.
"""

from .config import ModelConfig, SimConfig, SolverConfig, load_config, parse_config
from .errors import (
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    DimensionError,
    GridOverflowError,
    LossySchedError,
    ModelError,
    NumericalError,
    PossiblyUnstableError,
    SingularMatrixError,
)
from .kernel import KernelBranch, apply_kernel, branches, kalman_gain, step_filter, t_q, xi
from .mdp import (
    CompiledKernel,
    SchedulingPolicy,
    StateGrid,
    ValueTable,
    build_grid,
    default_r_max,
    discounted_vi,
    evaluate_policy_cost,
    finite_horizon_dp,
    fit_growth_constants,
    rolling_horizon_policy,
    rvi,
    value_iteration,
)
from .model import (
    MinorizationResult,
    NetworkModel,
    PlantModel,
    ValidationReport,
    check_controllable,
    check_detectable,
    check_minorization,
    check_stabilizable,
    require_valid,
    validate,
)
from .psd import (
    CovMatrix,
    Order,
    max_eig,
    min_eig,
    psd_order,
    random_psd,
    sym_solve_spd,
    symmetrize,
)
from .riccati import RiccatiSolution, finite_horizon_lqr, pi_tilde_of, riccati_map, solve_are
from .sim import (
    LossRateEstimator,
    RoundRobinPolicy,
    SimTrace,
    estimate_cost,
    online_loss_estimator,
    run_episode,
    write_trace_csv,
    write_trace_jsonl,
)
from .stability import (
    DiagonalRegion,
    RayBoundary,
    RegionMap,
    RegionSample,
    Verdict,
    diagonal_region,
    drift_certificate_diagonal,
    epsilon_zero,
    expected_trace_growth,
    greedy_policy,
    map_region,
    mc_stability_probe,
    probe_oracle,
    region_to_csv,
    simulate_cov_chain,
    uniform_loss_builder,
)

__version__ = "0.1.0"
