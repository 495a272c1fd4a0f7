"""Classification accuracy, disparate impact, the loss-gap diagnostic, and
confidence-interval aggregation."""

from dataclasses import dataclass

import numpy as np

from .losses import ScoreVector, sigmoid
from .validation import as_float_vector, check_same_length


@dataclass(frozen=True)
class EvalResult:
    """Point metrics for one score vector on one labeled dataset.

    disparate_impact is favorable-rate(protected) / favorable-rate(rest).
    A zero numerator gives 0.0; a zero denominator leaves the ratio
    undefined (NaN) with di_defined False so aggregates can skip it.
    """

    accuracy: float
    disparate_impact: float
    di_defined: bool
    favorable_rate_protected: float
    favorable_rate_unprotected: float
    n: int


@dataclass(frozen=True)
class AggregateRow:
    mean: float
    ci95_halfwidth: float
    n_runs: int


def _scores(u):
    return u.values if isinstance(u, ScoreVector) else as_float_vector(u, "scores")


def evaluate(scores, dataset) -> EvalResult:
    """Threshold logits at 0 (probability 0.5) and score the predictions."""
    u = _scores(scores)
    if dataset.labels is None:
        raise ValueError("evaluate needs a labeled dataset")
    y = dataset.labels
    check_same_length((u, "scores"), (y, "labels"))
    pred = (u > 0.0).astype(np.float64)
    accuracy = float(np.mean(pred == y))
    favorable = pred == float(dataset.favorable_label)
    prot = dataset.protected == 1.0
    n_prot = int(np.sum(prot))
    n_unprot = len(y) - n_prot
    rate_prot = float(np.mean(favorable[prot])) if n_prot else np.nan
    rate_unprot = float(np.mean(favorable[~prot])) if n_unprot else np.nan
    if n_prot == 0 or n_unprot == 0 or rate_unprot == 0.0:
        di, defined = np.nan, False
    else:
        di, defined = rate_prot / rate_unprot, True
    return EvalResult(
        accuracy=accuracy,
        disparate_impact=di,
        di_defined=defined,
        favorable_rate_protected=rate_prot,
        favorable_rate_unprotected=rate_unprot,
        n=len(y),
    )


def delta_loss(f_logits, h_logits, g_logits, y) -> float:
    """(1/n) (sigmoid(f) - y)^T (g - (h - f)).

    The measured gap between the adjusted and jointly trained cross-entropy;
    zero when g reproduces h - f exactly or the baseline is calibrated.
    """
    f = _scores(f_logits)
    h = _scores(h_logits)
    g = _scores(g_logits)
    y = as_float_vector(y, "y")
    check_same_length((f, "f"), (h, "h"), (g, "g"), (y, "y"))
    return float((sigmoid(f) - y) @ (g - (h - f))) / len(y)


def aggregate(values) -> AggregateRow:
    """Sample mean with a normal-approximation 95% interval (ddof=1)."""
    values = as_float_vector(np.asarray(values, dtype=np.float64), "values")
    if len(values) < 2:
        raise ValueError("aggregate needs at least 2 values")
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1))
    return AggregateRow(
        mean=mean,
        ci95_halfwidth=1.96 * sd / np.sqrt(len(values)),
        n_runs=len(values),
    )
