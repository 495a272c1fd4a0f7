"""Fairness adjustment for tabular models: baseline training, in-training
adversarial debiasing, and a post-hoc score adjuster, with numerical checks
of the optimality relations between them and a benchmark harness."""

from .datasets import CsvSchema, Dataset, FoldPlan, load_csv, make_folds, split
from .fairness import (
    Adversary,
    AdversarialPenalty,
    OverpredictionGap,
    OverpredictionGapSquared,
    adversary_update,
    combined_grad_hess,
    fairness_grad,
    make_penalty,
)
from .learners import (
    BoostedTrees,
    GradHessBatch,
    LogisticRegressionGD,
    OrdinaryLeastSquares,
    load_model,
    predict,
    save_model,
)
from .losses import LossEval, ScoreVector, bce, bce_identity_gap, mse, sigmoid
from .metrics import AggregateRow, EvalResult, aggregate, delta_loss, evaluate
from .train import (
    TrainConfig,
    TrainedTriple,
    fit_adjuster,
    fit_baseline,
    fit_joint,
    fit_triple,
    predict_adjusted,
)

__version__ = "0.1.0"

__all__ = [
    "AdversarialPenalty",
    "Adversary",
    "AggregateRow",
    "BoostedTrees",
    "CsvSchema",
    "Dataset",
    "EvalResult",
    "FoldPlan",
    "GradHessBatch",
    "LogisticRegressionGD",
    "LossEval",
    "OrdinaryLeastSquares",
    "OverpredictionGap",
    "OverpredictionGapSquared",
    "ScoreVector",
    "TrainConfig",
    "TrainedTriple",
    "adversary_update",
    "aggregate",
    "bce",
    "bce_identity_gap",
    "combined_grad_hess",
    "delta_loss",
    "evaluate",
    "fairness_grad",
    "fit_adjuster",
    "fit_baseline",
    "fit_joint",
    "fit_triple",
    "load_csv",
    "load_model",
    "make_folds",
    "make_penalty",
    "mse",
    "predict",
    "predict_adjusted",
    "save_model",
    "sigmoid",
    "split",
]
