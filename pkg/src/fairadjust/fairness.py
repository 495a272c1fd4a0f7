"""Differentiable fairness penalties over score vectors.

Every penalty exposes ``value_and_grad(u, protected) -> (value, grad)`` where
grad is d(value)/du, unscaled by the strength lam. The uniform convention is
that training objectives read ``primary + lam * penalty``; for the
adversarial penalty the value is the negated adversary loss, so gradient
descent on the combined objective pushes scores in the direction that makes
group membership harder to infer.
"""

from dataclasses import dataclass, replace

import numpy as np

from .learners import GradHessBatch, floor_hess
from .losses import LossEval, sigmoid
from .validation import as_binary_vector, as_float_vector, check_same_length

PENALTY_KINDS = ("adversarial", "overprediction_gap", "overprediction_gap_squared")


@dataclass(frozen=True)
class Adversary:
    """Logistic probe P(protected = 1 | u) = sigmoid(a * u + b).

    The probe sees only the scalar model score, not the features. Its own
    BCE is minimized by full-batch gradient descent with mean-scaled
    gradients, so step sizes do not depend on n.
    """

    a: float = 0.0
    b: float = 0.0
    adv_step_size: float = 0.1
    adv_steps_per_round: int = 5

    def predict_proba(self, u):
        return sigmoid(self.a * np.asarray(u, dtype=np.float64) + self.b)

    def loss(self, u, protected):
        """Sum-BCE of the probe against the protected attribute."""
        z = self.a * np.asarray(u, dtype=np.float64) + self.b
        return float(np.sum(np.logaddexp(0.0, z) - protected * z))


def fresh_adversary(protected, adv_step_size=0.1, adv_steps_per_round=5):
    """Unbiased start: zero slope, intercept at the group base rate."""
    protected = as_binary_vector(protected, "protected")
    rate = float(np.clip(np.mean(protected), 1e-12, 1.0 - 1e-12))
    return Adversary(
        a=0.0,
        b=float(np.log(rate) - np.log1p(-rate)),
        adv_step_size=adv_step_size,
        adv_steps_per_round=adv_steps_per_round,
    )


def _adv_mean_loss(a, b, u, protected):
    z = a * u + b
    return float(np.mean(np.logaddexp(0.0, z) - protected * z))


def adversary_update(adv, u, protected):
    """Run the probe's own descent steps; returns the updated adversary.

    Each step moves along the full-batch mean gradient at adv_step_size,
    halving the step until the probe's loss does not increase. The halving
    keeps the probe stable when the main model drags scores around, without
    changing the plain-descent behavior at small step sizes.
    """
    u = as_float_vector(np.asarray(u, dtype=np.float64), "u")
    protected = as_binary_vector(protected, "protected")
    check_same_length((u, "u"), (protected, "protected"))
    n = len(u)
    a, b = adv.a, adv.b
    loss = _adv_mean_loss(a, b, u, protected)
    for _ in range(adv.adv_steps_per_round):
        r = sigmoid(a * u + b) - protected
        grad_a = float(r @ u) / n
        grad_b = float(np.sum(r)) / n
        if grad_a * grad_a + grad_b * grad_b <= 1e-24:
            break
        step = adv.adv_step_size
        for _try in range(50):
            new_a = a - step * grad_a
            new_b = b - step * grad_b
            new_loss = _adv_mean_loss(new_a, new_b, u, protected)
            if np.isfinite(new_loss) and new_loss <= loss:
                break
            step *= 0.5
        else:
            break
        converged = loss - new_loss <= 1e-13 * (1.0 + abs(loss))
        a, b, loss = new_a, new_b, new_loss
        if converged:
            break
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("adversary update produced non-finite parameters")
    return replace(adv, a=a, b=b)


class AdversarialPenalty:
    """Negated adversary loss; maximizing it hides the protected attribute."""

    kind = "adversarial"

    def __init__(self, lam, adversary):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        if adversary is None:
            raise ValueError("adversarial penalty needs an adversary")
        self.lam = lam
        self.adversary = adversary

    @property
    def needs_labels(self):
        return False

    def value_and_grad(self, u, protected):
        u = as_float_vector(np.asarray(u, dtype=np.float64), "u")
        protected = as_binary_vector(protected, "protected")
        check_same_length((u, "u"), (protected, "protected"))
        value = -self.adversary.loss(u, protected)
        grad = -(self.adversary.predict_proba(u) - protected) * self.adversary.a
        return value, grad

    def round_update(self, u, protected):
        self.adversary = adversary_update(self.adversary, u, protected)


class _GapBase:
    """Difference of group means of (score - label).

    G1 is the protected group, G2 the rest. The label vector is fixed at
    construction; it shifts the gap by a constant, so gradients never see it.
    """

    def __init__(self, lam, y):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.lam = lam
        self.y = as_float_vector(y, "y")

    @property
    def needs_labels(self):
        return True

    def _gap_and_direction(self, u, protected):
        u = as_float_vector(np.asarray(u, dtype=np.float64), "u")
        protected = as_binary_vector(protected, "protected")
        check_same_length((u, "u"), (protected, "protected"), (self.y, "y"))
        g1 = protected == 1.0
        n1 = int(np.sum(g1))
        n2 = len(u) - n1
        if n1 == 0 or n2 == 0:
            raise ValueError("both protected groups must be non-empty")
        over = u - self.y
        gap = float(np.mean(over[g1]) - np.mean(over[~g1]))
        direction = np.where(g1, 1.0 / n1, -1.0 / n2)
        return gap, direction


class OverpredictionGap(_GapBase):
    """Signed gap; linear in the scores."""

    kind = "overprediction_gap"

    def value_and_grad(self, u, protected):
        gap, direction = self._gap_and_direction(u, protected)
        return gap, direction


class OverpredictionGapSquared(_GapBase):
    """Squared gap; the convex variant used by the optimality checks."""

    kind = "overprediction_gap_squared"

    def value_and_grad(self, u, protected):
        gap, direction = self._gap_and_direction(u, protected)
        return gap * gap, 2.0 * gap * direction


def make_penalty(kind, lam, y=None, adversary=None):
    if kind == "adversarial":
        return AdversarialPenalty(lam, adversary)
    if kind == "overprediction_gap":
        if y is None:
            raise ValueError("overprediction_gap penalty needs labels; none supplied")
        return OverpredictionGap(lam, y)
    if kind == "overprediction_gap_squared":
        if y is None:
            raise ValueError(
                "overprediction_gap_squared penalty needs labels; none supplied"
            )
        return OverpredictionGapSquared(lam, y)
    raise ValueError(f"unknown penalty kind {kind!r}")


def fairness_grad(penalty, u, protected):
    """(penalty value, d value / d u), unscaled by lam."""
    return penalty.value_and_grad(u, protected)


def combined_grad_hess(primary: LossEval, penalty, u, protected) -> GradHessBatch:
    """Gradient of primary + lam * penalty; hessian is the primary's, floored.

    Penalty curvature is omitted on purpose: the adversarial term's curvature
    is non-positive and would destabilize Newton leaf weights.
    """
    if penalty is None or penalty.lam == 0.0:
        return GradHessBatch(primary.grad, floor_hess(primary.hess))
    _, pgrad = penalty.value_and_grad(u, protected)
    return GradHessBatch(
        primary.grad + penalty.lam * pgrad, floor_hess(primary.hess)
    )
