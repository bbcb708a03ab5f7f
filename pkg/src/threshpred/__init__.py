"""Threshold predictive regression with stochastic local-unit-root regressors.

Simulation of locally explosive regressor dynamics, concentrated least
squares and IVX estimation of threshold predictive regressions, sup-Wald
predictability tests, simulation of the associated limit laws and critical
values, and a reproducible Monte Carlo experiment harness.
"""

__version__ = "0.1.0"

from .innovations import CovarianceSpec, InnovationPanel, assemble_covariance, draw_innovations
from .dgp import (
    PERSISTENCE_SCENARIOS,
    PersistenceSpec,
    RegressorPath,
    Sample,
    ThresholdDgpSpec,
    assemble_threshold_sample,
    benchmark_dgp,
    gen_regressor_path,
    gen_threshold_sample,
    realized_rho,
)
from .estimate import (
    ThresholdFit,
    ThresholdGrid,
    build_design,
    build_threshold_grid,
    estimate_threshold,
    ols_fit,
    ssr_profile,
)
from .persistence import PersistenceFit, fit_persistence, nlls_objective
from .ivx import (
    CorrectedInstrument,
    IvxConfig,
    IvxFit,
    build_corrected_instrument,
    build_instrument,
    draw_filtered_shock_limit,
    ivx_fit,
)
from .wald import (
    Hypothesis,
    WaldCurve,
    predictability_wald,
    sup_wald,
    wald_at_estimated_threshold,
    wald_ivx,
    wald_ols,
)
from .limitsim import (
    CriticalValueTable,
    MeshSpec,
    draw_linearity_sup_limit,
    draw_joint_sup_limit_ivx,
    draw_joint_sup_limit_ols,
    draw_threshold_location_limit,
    simulate_ou_env_path,
    tabulate_critical_values,
)
from .mc import ExperimentResult, ExperimentSpec, run_experiment, summarize
from .rng import derive_rng

__all__ = [
    "CovarianceSpec", "InnovationPanel", "assemble_covariance", "draw_innovations",
    "PersistenceSpec", "RegressorPath", "Sample", "ThresholdDgpSpec",
    "assemble_threshold_sample", "benchmark_dgp", "gen_regressor_path", "gen_threshold_sample", "realized_rho",
    "PERSISTENCE_SCENARIOS",
    "ThresholdFit", "ThresholdGrid", "build_design", "build_threshold_grid",
    "estimate_threshold", "ols_fit", "ssr_profile",
    "PersistenceFit", "fit_persistence", "nlls_objective",
    "CorrectedInstrument", "IvxConfig", "IvxFit", "build_corrected_instrument",
    "build_instrument", "draw_filtered_shock_limit", "ivx_fit",
    "Hypothesis", "WaldCurve", "predictability_wald", "sup_wald",
    "wald_at_estimated_threshold", "wald_ivx", "wald_ols",
    "CriticalValueTable", "MeshSpec", "draw_linearity_sup_limit",
    "draw_joint_sup_limit_ivx", "draw_joint_sup_limit_ols",
    "draw_threshold_location_limit", "simulate_ou_env_path", "tabulate_critical_values",
    "ExperimentResult", "ExperimentSpec", "run_experiment", "summarize",
    "derive_rng",
    "__version__",
]
