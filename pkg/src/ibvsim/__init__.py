"""Moment-feature visual servoing: moments, interaction model, constrained
MPC with an internal QP solver, Kalman filtering, and a closed-loop
virtual-camera simulator with a scenario CLI."""

from .errors import (
    ConfigError,
    DegeneratePolygon,
    DimensionMismatch,
    EmptyRegion,
    IbvsimError,
    NonPositiveArea,
    NonPositiveDepth,
    SingularInnovation,
    SingularInteraction,
    SingularModel,
    TargetBehindCamera,
    TrialDiverged,
)
from .interaction import ControlInput, ibvs_law, interaction_matrix
from .kalman import KalmanConfig, KalmanState, init_state, predict, step, update
from .moments import (
    ConvexPolygon,
    FeatureVector,
    GrayImage,
    MomentSet,
    central_moments,
    feature_vector,
    polygon_moments,
    rasterize,
    raw_moment,
)
from .mpc import (
    MpcConfig,
    PredictionMatrices,
    build_prediction,
    condense,
    discretize,
    mpc_step,
    predict_errors,
)
from .qp import QpProblem, QpSolution, QpStatus, solve_qp
from .simworld import (
    CameraState,
    Scenario,
    TrialMetrics,
    TrialResult,
    compute_metrics,
    integrate,
    observe,
    rectangle_target,
    reference_features,
    run_trial,
    safety_clamp,
)

__version__ = "0.1.0"

__all__ = [
    "CameraState",
    "ConfigError",
    "ControlInput",
    "ConvexPolygon",
    "DegeneratePolygon",
    "DimensionMismatch",
    "EmptyRegion",
    "FeatureVector",
    "GrayImage",
    "IbvsimError",
    "KalmanConfig",
    "KalmanState",
    "MomentSet",
    "MpcConfig",
    "NonPositiveArea",
    "NonPositiveDepth",
    "PredictionMatrices",
    "QpProblem",
    "QpSolution",
    "QpStatus",
    "Scenario",
    "SingularInnovation",
    "SingularInteraction",
    "SingularModel",
    "TargetBehindCamera",
    "TrialDiverged",
    "TrialMetrics",
    "TrialResult",
    "build_prediction",
    "central_moments",
    "compute_metrics",
    "condense",
    "discretize",
    "feature_vector",
    "ibvs_law",
    "init_state",
    "integrate",
    "interaction_matrix",
    "mpc_step",
    "observe",
    "polygon_moments",
    "predict",
    "predict_errors",
    "rasterize",
    "raw_moment",
    "rectangle_target",
    "reference_features",
    "run_trial",
    "safety_clamp",
    "solve_qp",
    "step",
    "update",
]
