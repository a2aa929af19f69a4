"""Corrected Adams-Bashforth sampling for flow/diffusion reverse-time ODEs.

The toolkit rectifies schedule-driven reverse dynamics into noise-to-signal
coordinates, integrates them with variable-step two- and three-step predictors
carrying a zero-extra-evaluation extrapolation-defect correction, and ships an
oracle-backed harness that measures observed convergence orders.
"""

from .benchfields import (
    BenchField,
    constant_field,
    eval_v1,
    eval_v2,
    exact_solution,
    exp_decay_field,
    linear_field,
    make_field,
    quadratic_field,
    v1_field,
    v2_field,
)
from .errors import (
    CabKitError,
    DivergenceError,
    DomainError,
    FitError,
    GeometryError,
    HistoryError,
    NumericError,
    ScheduleViolationError,
    StepUnderflowError,
    StiffnessError,
)
from .harness import (
    ComparisonReport,
    ConvergenceReport,
    SolverSetting,
    StudySpec,
    VariationReport,
    default_study,
    estimate_order,
    field_variation_report,
    low_nfe_comparison,
    run_study,
    solver_setting,
    study_convention,
)
from .multistep import (
    CombinedCoefficients,
    ExtremeStepRatioWarning,
    GammaPolicy,
    StepGeometry,
    ab2_weights,
    ab3_weights,
    cab_update,
    combined_coefficients,
    extrapolation_defect_weights,
    leading_truncation_kappa,
)
from .oracle import GOLDEN_CONFIG, OracleConfig, integrate, integrate_fixed
from .rectify import (
    ModelField,
    RectifiedField,
    model_from_rho_field,
    rectify_eval,
    reverse_ode_rhs,
)
from .sampler import (
    SamplerConfig,
    SamplingGrid,
    Trajectory,
    TrajectoryNode,
    build_grid,
    sample,
    sample_reverse_ode,
)
from .schedule import (
    Schedule,
    ScheduleValues,
    SdeCoefficients,
    custom_schedule,
    make_schedule,
    rectified_flow,
    ve,
    vp_linear,
)

__version__ = "0.1.0"

__all__ = [
    "BenchField",
    "CabKitError",
    "CombinedCoefficients",
    "ComparisonReport",
    "ConvergenceReport",
    "DivergenceError",
    "DomainError",
    "ExtremeStepRatioWarning",
    "FitError",
    "GOLDEN_CONFIG",
    "GammaPolicy",
    "GeometryError",
    "HistoryError",
    "ModelField",
    "NumericError",
    "OracleConfig",
    "RectifiedField",
    "SamplerConfig",
    "SamplingGrid",
    "Schedule",
    "ScheduleValues",
    "ScheduleViolationError",
    "SdeCoefficients",
    "SolverSetting",
    "StepGeometry",
    "StepUnderflowError",
    "StiffnessError",
    "StudySpec",
    "Trajectory",
    "TrajectoryNode",
    "VariationReport",
    "ab2_weights",
    "ab3_weights",
    "build_grid",
    "cab_update",
    "combined_coefficients",
    "constant_field",
    "custom_schedule",
    "default_study",
    "estimate_order",
    "eval_v1",
    "eval_v2",
    "exact_solution",
    "exp_decay_field",
    "extrapolation_defect_weights",
    "field_variation_report",
    "integrate",
    "integrate_fixed",
    "leading_truncation_kappa",
    "linear_field",
    "low_nfe_comparison",
    "make_field",
    "make_schedule",
    "model_from_rho_field",
    "quadratic_field",
    "rectified_flow",
    "rectify_eval",
    "reverse_ode_rhs",
    "run_study",
    "sample",
    "sample_reverse_ode",
    "solver_setting",
    "study_convention",
    "v1_field",
    "v2_field",
    "ve",
    "vp_linear",
]
