"""Simulation and geometric-ergodicity condition checking for multivariate
nonlinear stochastic difference equations X_t = f(X_{t-1}) + g(X_{t-1}) e_t
with locally singular, discontinuous coefficients."""

__version__ = "0.1.0"

from .config import ConfigError, builtin_configs, validate_config
from .ergodicity import (
    VERDICT_FAILED,
    VERDICT_INCONCLUSIVE,
    VERDICT_MET,
    DriftEnvelope,
    ErgodicityReport,
    bekk_degeneracy,
    bekk_gamma,
    check_bekk_model,
    check_coefexpol,
    check_threshold_model,
    drift_gamma,
    empirical_drift_check,
    probe_skeleton_reachability,
    shell_estimate_envelope,
    threshold_envelope,
)
from .models import (
    AffineMap,
    BekkArch,
    GenericModel,
    ThresholdAffine2D,
    bekk_line_normal,
    classify_region,
    eval_f,
    eval_g,
    g_determinant,
    iterate,
    step,
)
from .noise import BoundedCustomDensity, Expol2, MomentEstimate, StdGaussian, abs_moment
from .norms import (
    frobenius_norm,
    matrix_col_sum_norm,
    operator_norm,
    psd_sqrt,
    vector_s_norm,
)
from .simulate import (
    EnsembleSummary,
    SimulationConfig,
    aggregate_ensemble,
    estimate_stationary_moments,
    mix64,
    run_trajectories,
    simulate_ensemble,
    simulate_path,
    snapshot_distance,
)

__all__ = [
    "__version__",
    "AffineMap",
    "BekkArch",
    "BoundedCustomDensity",
    "ConfigError",
    "DriftEnvelope",
    "EnsembleSummary",
    "ErgodicityReport",
    "Expol2",
    "GenericModel",
    "MomentEstimate",
    "SimulationConfig",
    "StdGaussian",
    "ThresholdAffine2D",
    "VERDICT_FAILED",
    "VERDICT_INCONCLUSIVE",
    "VERDICT_MET",
    "abs_moment",
    "aggregate_ensemble",
    "bekk_degeneracy",
    "bekk_gamma",
    "bekk_line_normal",
    "builtin_configs",
    "check_bekk_model",
    "check_coefexpol",
    "check_threshold_model",
    "classify_region",
    "drift_gamma",
    "empirical_drift_check",
    "estimate_stationary_moments",
    "eval_f",
    "eval_g",
    "frobenius_norm",
    "g_determinant",
    "iterate",
    "matrix_col_sum_norm",
    "mix64",
    "operator_norm",
    "probe_skeleton_reachability",
    "psd_sqrt",
    "run_trajectories",
    "shell_estimate_envelope",
    "simulate_ensemble",
    "simulate_path",
    "snapshot_distance",
    "step",
    "threshold_envelope",
    "validate_config",
    "vector_s_norm",
]
