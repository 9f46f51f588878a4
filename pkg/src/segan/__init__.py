"""Semi-supervised adversarial imputation of tabular data with missing entries."""

__version__ = "0.1.0"

from .data import Dataset, decode, encode, holdout_known, inject_mcar, load_csv, mask_labels
from .errors import (
    ConfigError,
    DatasetTooSmallError,
    DivergenceError,
    EvaluationError,
    ParseError,
    SchemaError,
    SeganError,
    ShapeError,
)
from .evaluation import (
    EvalResult,
    downstream_eval,
    evaluate_dataset,
    rmse,
    run_ablation,
    run_experiment,
    sweep_missing_rate,
)
from .model import SeganModel, load_model, save_model
from .training import TrainConfig, TrainReport, build_variant, impute, train
