"""Task losses (MSE, BCE) and the logistic link.

All loss values are unnormalized sums over examples; reporting code divides
by n where a per-example figure is wanted. Gradients and hessians are taken
with respect to the raw score vector u.
"""

from dataclasses import dataclass

import numpy as np

from .validation import as_float_vector, check_same_length

# Probabilities are kept this far away from exact 0/1 so logs and logits
# stay finite under saturation.
PROB_EPS = 1e-12


@dataclass(frozen=True)
class ScoreVector:
    """Raw model outputs over a dataset.

    scale is "raw" for regression outputs and "logit" for classification
    scores (probability = sigmoid(values)).
    """

    values: np.ndarray
    scale: str = "raw"

    def __post_init__(self):
        values = as_float_vector(self.values, "values")
        object.__setattr__(self, "values", values)
        if self.scale not in ("raw", "logit"):
            raise ValueError(f"unknown scale {self.scale!r}")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class LossEval:
    """Loss value with per-example first and second derivatives in u."""

    value: float
    grad: np.ndarray
    hess: np.ndarray


def _values(u):
    if isinstance(u, ScoreVector):
        return u.values
    return as_float_vector(u, "u")


def sigmoid(u):
    """Numerically stable logistic link, clamped to [eps, 1-eps]."""
    u = _values(u)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    expu = np.exp(u[~pos])
    out[~pos] = expu / (1.0 + expu)
    return np.clip(out, PROB_EPS, 1.0 - PROB_EPS)


def logit(p):
    """Inverse of sigmoid, with the same clamping."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    return np.log(p) - np.log1p(-p)


def mse(u, y) -> LossEval:
    """Sum of squared errors with grad 2(u-y) and hess 2."""
    u = _values(u)
    y = as_float_vector(y, "y")
    check_same_length((u, "u"), (y, "y"))
    r = u - y
    return LossEval(value=float(r @ r), grad=2.0 * r, hess=np.full_like(u, 2.0))


def bce(u, y) -> LossEval:
    """Binary cross entropy against (possibly soft) labels in [0, 1].

    The value is computed in log-sum-exp form, sum(softplus(u) - y*u), which
    is exact for any logit magnitude; grad is sigmoid(u) - y, hess is
    sigmoid(u) * (1 - sigmoid(u)).
    """
    u = _values(u)
    y = as_float_vector(y, "y")
    check_same_length((u, "u"), (y, "y"))
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise ValueError("bce labels must lie in [0, 1]")
    value = float(np.sum(np.logaddexp(0.0, u) - y * u))
    p = sigmoid(u)
    return LossEval(value=value, grad=p - y, hess=p * (1.0 - p))


def bce_identity_gap(u, soft, hard, f) -> float:
    """Residual of the cross-entropy decomposition against soft labels.

    Returns BCE(u, soft) - [BCE(u, hard) - sum((soft - hard) * u)], where
    soft is the sigmoid of the logits f. Analytically zero because the log
    odds of sigmoid(u) is u itself; any residual is implementation error.
    """
    u = _values(u)
    soft = as_float_vector(soft, "soft")
    hard = as_float_vector(hard, "hard")
    f = _values(f)
    check_same_length((u, "u"), (soft, "soft"), (hard, "hard"), (f, "f"))
    lhs = bce(u, soft).value
    rhs = bce(u, hard).value - float(np.sum((soft - hard) * u))
    return lhs - rhs
