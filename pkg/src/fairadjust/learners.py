"""Trainable predictors: closed-form OLS, full-batch logistic gradient
descent, and a second-order gradient-boosted tree learner that accepts
arbitrary per-example gradient/hessian callbacks.

All learners are deterministic: identical inputs and hyperparameters give
bit-identical models. Fitted models carry a ``score_scale_`` attribute
("raw" for regression outputs, "logit" for classification scores).
"""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .losses import ScoreVector, logit, sigmoid
from .validation import (
    as_float_matrix,
    as_float_vector,
    check_feature_count,
    check_same_length,
)

MODEL_FORMAT_VERSION = 1

# Curvature can go negative once fairness terms are subtracted from the
# objective; Newton leaf weights need a strictly positive floor.
HESS_FLOOR = 1e-6


class RankDeficiencyError(ValueError):
    """Design matrix is rank deficient; carries a condition estimate."""


class DivergenceError(RuntimeError):
    """Iterative fit produced a non-finite loss."""


@dataclass(frozen=True)
class GradHessBatch:
    """Per-example gradient and (floored) hessian for one boosting round."""

    grad: np.ndarray
    hess: np.ndarray


def floor_hess(hess, floor=HESS_FLOOR):
    return np.maximum(hess, floor)


def _augment(X):
    """Append the intercept column (last, matching coefficient layout)."""
    return np.hstack([X, np.ones((X.shape[0], 1))])


# ---------------------------------------------------------------------------
# linear models
# ---------------------------------------------------------------------------


class OrdinaryLeastSquares(BaseEstimator):
    """Exact least-squares fit via SVD on the intercept-augmented matrix.

    Attributes
    ----------
    coef_ : ndarray of shape (d + 1,)
        Coefficients, intercept last.
    """

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_same_length((X, "X"), (y, "y"))
        A = _augment(X)
        beta, _, rank, sv = np.linalg.lstsq(A, y, rcond=None)
        if rank < A.shape[1]:
            cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
            raise RankDeficiencyError(
                f"design matrix rank {rank} < {A.shape[1]} columns "
                f"(condition estimate {cond:.3e})"
            )
        self.coef_ = beta
        self.n_features_in_ = X.shape[1]
        self.score_scale_ = "raw"
        return self

    def predict(self, X):
        _require_fitted(self, "coef_")
        X = as_float_matrix(X)
        check_feature_count(X, self.n_features_in_)
        return _augment(X) @ self.coef_


class LogisticRegressionGD(BaseEstimator):
    """Full-batch gradient descent on sum-BCE(X beta, y) + l2 * ||beta||^2.

    Labels may be soft (anywhere in [0, 1]). step_size=None picks 1/L from
    the curvature bound 0.25 * lambda_max(A^T A) + 2*l2. Fitting stops early
    once the gradient norm falls below tol.

    Attributes
    ----------
    coef_ : ndarray of shape (d + 1,), intercept last.
    grad_norm_ : float, gradient norm at the returned iterate.
    n_steps_ : int, gradient steps actually taken.
    """

    def __init__(self, steps=10000, step_size=None, l2=0.0, tol=0.0):
        self.steps = steps
        self.step_size = step_size
        self.l2 = l2
        self.tol = tol

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_same_length((X, "X"), (y, "y"))
        if np.any(y < 0.0) or np.any(y > 1.0):
            raise ValueError("labels must lie in [0, 1]")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        A = _augment(X)
        step = self.step_size
        if step is None:
            lam_max = float(np.linalg.eigvalsh(A.T @ A)[-1])
            step = 1.0 / (0.25 * lam_max + 2.0 * self.l2 + 1e-12)

        beta = np.zeros(A.shape[1])
        grad_norm = np.inf
        taken = 0
        for k in range(self.steps):
            u = A @ beta
            loss = float(np.sum(np.logaddexp(0.0, u) - y * u)) + self.l2 * float(
                beta @ beta
            )
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became non-finite at step {k}")
            grad = A.T @ (sigmoid(u) - y) + 2.0 * self.l2 * beta
            grad_norm = float(np.linalg.norm(grad))
            if grad_norm <= self.tol:
                break
            beta = beta - step * grad
            taken = k + 1

        self.coef_ = beta
        self.grad_norm_ = grad_norm
        self.n_steps_ = taken
        self.n_features_in_ = X.shape[1]
        self.score_scale_ = "logit"
        return self

    def predict(self, X):
        """Logits of the positive class."""
        _require_fitted(self, "coef_")
        X = as_float_matrix(X)
        check_feature_count(X, self.n_features_in_)
        return _augment(X) @ self.coef_

    def predict_proba(self, X):
        p = sigmoid(self.predict(X))
        return np.column_stack([1.0 - p, p])


# ---------------------------------------------------------------------------
# boosted regression trees
# ---------------------------------------------------------------------------


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature=None, threshold=None, left=None, right=None, value=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    @property
    def is_leaf(self):
        return self.feature is None

    def predict(self, X):
        out = np.empty(X.shape[0])
        stack = [(self, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = node.value
                continue
            go_left = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def to_dict(self):
        if self.is_leaf:
            return {"w": self.value}
        return {
            "f": self.feature,
            "t": self.threshold,
            "l": self.left.to_dict(),
            "r": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if "w" in d:
            return cls(value=float(d["w"]))
        return cls(
            feature=int(d["f"]),
            threshold=float(d["t"]),
            left=cls.from_dict(d["l"]),
            right=cls.from_dict(d["r"]),
        )


def _best_split(X, order, g, h, l2_reg, min_child_weight):
    """Exact greedy split search over every feature at once.

    order holds per-column presorted row positions into X. Returns
    (gain, feature, threshold) for the largest strictly positive gain, or
    None. Ties break to the lowest feature index, then the lowest
    threshold. Thresholds are observed feature values; rows with
    x <= threshold go left.
    """
    m = X.shape[0]
    if m < 2:
        return None
    Xs = np.take_along_axis(X, order, axis=0)
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    G = float(g.sum())
    H = float(h.sum())
    GR = G - GL
    HR = H - HL
    valid = (
        (Xs[:-1] < Xs[1:])
        & (HL >= min_child_weight)
        & (HR >= min_child_weight)
    )
    if not valid.any():
        return None
    gain = GL**2 / (HL + l2_reg) + GR**2 / (HR + l2_reg) - G**2 / (H + l2_reg)
    gain = np.where(valid, gain, -np.inf)
    # feature-major flattening makes argmax honor the tie-break order
    flat = gain.T.ravel()
    k = int(np.argmax(flat))
    best = float(flat[k])
    if best <= 0.0:
        return None
    feature, pos = divmod(k, m - 1)
    return best, feature, float(Xs[pos, feature])


def _partition_order(order, keep):
    """Restrict presorted per-column positions to the kept rows.

    keep is a boolean row mask; each column of the result lists the
    surviving rows in the same sorted order, renumbered to the subset.
    """
    new_index = np.cumsum(keep) - 1
    mask = keep[order]
    m_new = int(keep.sum())
    d = order.shape[1]
    sub = order.T[mask.T].reshape(d, m_new).T
    return new_index[sub]


def _build_tree(X, order, g, h, depth, l2_reg, min_child_weight):
    weight = -float(g.sum()) / (float(h.sum()) + l2_reg)
    if depth == 0:
        return _TreeNode(value=weight)
    found = _best_split(X, order, g, h, l2_reg, min_child_weight)
    if found is None:
        return _TreeNode(value=weight)
    _, feature, threshold = found
    go_left = X[:, feature] <= threshold
    left = _build_tree(
        X[go_left],
        _partition_order(order, go_left),
        g[go_left],
        h[go_left],
        depth - 1,
        l2_reg,
        min_child_weight,
    )
    right = _build_tree(
        X[~go_left],
        _partition_order(order, ~go_left),
        g[~go_left],
        h[~go_left],
        depth - 1,
        l2_reg,
        min_child_weight,
    )
    return _TreeNode(feature=feature, threshold=threshold, left=left, right=right)


class BoostedTrees(BaseEstimator):
    """Second-order boosted regression trees with exact greedy splits.

    Each round fits one tree to the Newton targets of the current scores:
    split gain G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2), leaf weight
    -G/(H+l2), appended with shrinkage learning_rate. The prediction is
    base_score + learning_rate * sum of tree outputs.

    objective selects the built-in loss for fit(): "mse" (raw scores) or
    "bce" (logit scores). fit_gradients() bypasses the objective and drives
    rounds from a callback instead.
    """

    def __init__(
        self,
        objective="bce",
        n_rounds=200,
        learning_rate=0.1,
        max_depth=3,
        l2_reg=1.0,
        min_child_weight=1.0,
        base_score=None,
    ):
        self.objective = objective
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.l2_reg = l2_reg
        self.min_child_weight = min_child_weight
        self.base_score = base_score

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_same_length((X, "X"), (y, "y"))
        if self.objective == "mse":
            base = float(np.mean(y)) if self.base_score is None else self.base_score

            def grad_fn(scores, _round):
                return GradHessBatch(2.0 * (scores - y), np.full_like(scores, 2.0))

            scale = "raw"
        elif self.objective == "bce":
            if np.any(y < 0.0) or np.any(y > 1.0):
                raise ValueError("bce labels must lie in [0, 1]")
            base = (
                float(logit(np.mean(y))) if self.base_score is None else self.base_score
            )

            def grad_fn(scores, _round):
                p = sigmoid(scores)
                return GradHessBatch(p - y, p * (1.0 - p))

            scale = "logit"
        else:
            raise ValueError(f"unknown objective {self.objective!r}")
        return self.fit_gradients(X, grad_fn, base_score=base, score_scale=scale)

    def fit_gradients(self, X, grad_fn, base_score=0.0, score_scale="raw"):
        """Boost against a callback.

        grad_fn(scores, round) must return a GradHessBatch (or a (grad, hess)
        pair) of length n for the current score vector; hessians are floored
        at HESS_FLOOR before the tree fit.
        """
        X = as_float_matrix(X)
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        n = X.shape[0]
        order = np.argsort(X, axis=0, kind="stable")
        trees = []
        tree_sum = np.zeros(n)
        scores = base_score + self.learning_rate * tree_sum
        for r in range(self.n_rounds):
            batch = grad_fn(scores, r)
            if not isinstance(batch, GradHessBatch):
                batch = GradHessBatch(*batch)
            grad = as_float_vector(batch.grad, "grad", allow_nonfinite=True)
            hess = as_float_vector(batch.hess, "hess", allow_nonfinite=True)
            check_same_length((grad, "grad"), (scores, "scores"))
            check_same_length((hess, "hess"), (scores, "scores"))
            if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
                raise ValueError(f"non-finite gradient/hessian at round {r}")
            hess = floor_hess(hess)
            tree = _build_tree(X, order, grad, hess, self.max_depth, self.l2_reg, self.min_child_weight)
            trees.append(tree)
            tree_sum = tree_sum + tree.predict(X)
            scores = base_score + self.learning_rate * tree_sum

        self.trees_ = trees
        self.base_score_ = float(base_score)
        self.n_features_in_ = X.shape[1]
        self.score_scale_ = score_scale
        self.train_scores_ = scores
        return self

    def predict(self, X):
        _require_fitted(self, "trees_")
        X = as_float_matrix(X)
        check_feature_count(X, self.n_features_in_)
        total = np.zeros(X.shape[0])
        for tree in self.trees_:
            total = total + tree.predict(X)
        return self.base_score_ + self.learning_rate * total

    def predict_proba(self, X):
        if self.score_scale_ != "logit":
            raise ValueError("predict_proba needs a logit-scale model")
        p = sigmoid(self.predict(X))
        return np.column_stack([1.0 - p, p])


def predict(model, X) -> ScoreVector:
    """Score a fitted model, tagging the scale it was trained in."""
    return ScoreVector(values=model.predict(X), scale=model.score_scale_)


def _require_fitted(model, attr):
    if not hasattr(model, attr):
        raise NotFittedError(f"{type(model).__name__} is not fitted yet")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def model_to_dict(model):
    if isinstance(model, OrdinaryLeastSquares):
        body = {"kind": "ols", "coef": list(model.coef_)}
    elif isinstance(model, LogisticRegressionGD):
        body = {
            "kind": "logistic_gd",
            "coef": list(model.coef_),
            "params": model.get_params(),
        }
    elif isinstance(model, BoostedTrees):
        body = {
            "kind": "boosted_trees",
            "params": model.get_params(),
            "base_score": model.base_score_,
            "score_scale": model.score_scale_,
            "trees": [t.to_dict() for t in model.trees_],
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    body["format_version"] = MODEL_FORMAT_VERSION
    body["n_features"] = model.n_features_in_
    return body


def model_from_dict(d):
    version = d.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    kind = d["kind"]
    if kind == "ols":
        model = OrdinaryLeastSquares()
        model.coef_ = np.asarray(d["coef"], dtype=np.float64)
        model.score_scale_ = "raw"
    elif kind == "logistic_gd":
        model = LogisticRegressionGD(**d["params"])
        model.coef_ = np.asarray(d["coef"], dtype=np.float64)
        model.score_scale_ = "logit"
    elif kind == "boosted_trees":
        model = BoostedTrees(**d["params"])
        model.trees_ = [_TreeNode.from_dict(t) for t in d["trees"]]
        model.base_score_ = float(d["base_score"])
        model.score_scale_ = d["score_scale"]
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    model.n_features_in_ = int(d["n_features"])
    return model


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
