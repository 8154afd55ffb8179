"""Activity-type prediction from dynamic and heart-rate features."""

from .evaluate import EvaluationReport, evaluate, round_class
from .features import (
    MODEL_FEATURES,
    ActivityType,
    Dataset,
    ExerciseRecord,
    HeartDerivedFeatures,
    build_dataset,
    dynamic_features,
    heart_derived,
    read_exercises,
    synthetic_exercises,
)
from .linear import DegenerateFit, LinearModel, RankDeficient, fit_linear, residual_diagnostics
from .network import (
    MlpModel,
    TrainingConfig,
    TrainingError,
    TrainingResult,
    deep_sizes,
    fit_network,
    mlp_forward,
    mlp_gradient,
    mlp_init,
    shallow_sizes,
    train_rprop,
)

__all__ = [
    "ActivityType", "Dataset", "DegenerateFit", "EvaluationReport", "ExerciseRecord",
    "HeartDerivedFeatures", "LinearModel", "MODEL_FEATURES", "MlpModel", "RankDeficient",
    "TrainingConfig", "TrainingError", "TrainingResult", "build_dataset", "deep_sizes",
    "dynamic_features", "evaluate", "fit_linear", "fit_network", "heart_derived", "mlp_forward",
    "mlp_gradient", "mlp_init", "read_exercises", "residual_diagnostics", "round_class",
    "shallow_sizes", "synthetic_exercises", "train_rprop",
]
