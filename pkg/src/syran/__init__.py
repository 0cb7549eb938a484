"""SYRAN: unsupervised anomaly detection via evolved symbolic invariants.

Learns an ensemble of human-readable expressions that stay approximately
equal to 1 on normal data, then scores test samples by calibrated deviation
from those invariants.
"""

from .data import Dataset, kepler_dataset, load_csv, train_test_split, write_csv
from .ensemble import (
    EnsembleModel,
    Hyperparameters,
    InvariantModel,
    fit,
    from_json,
    load_model,
    member_deviation,
    member_score,
    member_scores,
    sample_feature_subset,
    save_model,
    score,
    to_json,
)
from .evaluation import EvalReport, auc_roc, kepler_equivalence_rate, run_experiment
from .search import EvolutionConfig, EvolutionResult, crossover, evolve, mutate, random_expression
from .expr import (
    EvalOutcome,
    Expression,
    ExpressionError,
    ParseError,
    complexity,
    evaluate,
    evaluate_batch,
    numeric_equivalence,
    parse,
    to_text,
)
from .kernels import active_backend
from .objective import (
    FeatureRanges,
    LossBreakdown,
    TrainingContext,
    feature_ranges,
    mean_abs_deviation,
    sample_noise,
    total_loss,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EnsembleModel",
    "EvalOutcome",
    "EvalReport",
    "EvolutionConfig",
    "EvolutionResult",
    "Expression",
    "ExpressionError",
    "FeatureRanges",
    "Hyperparameters",
    "InvariantModel",
    "LossBreakdown",
    "ParseError",
    "TrainingContext",
    "active_backend",
    "auc_roc",
    "complexity",
    "crossover",
    "evaluate",
    "evaluate_batch",
    "evolve",
    "feature_ranges",
    "fit",
    "from_json",
    "kepler_dataset",
    "kepler_equivalence_rate",
    "load_csv",
    "load_model",
    "mean_abs_deviation",
    "member_deviation",
    "member_score",
    "member_scores",
    "mutate",
    "numeric_equivalence",
    "parse",
    "random_expression",
    "run_experiment",
    "sample_feature_subset",
    "sample_noise",
    "save_model",
    "score",
    "to_json",
    "to_text",
    "total_loss",
    "train_test_split",
    "write_csv",
]
