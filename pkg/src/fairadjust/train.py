"""The three training procedures: plain baseline, joint fairness-penalized
training, and the two-step score adjuster.

The adjuster never reads true labels: it fits an offset model g against the
baseline's own predictions (pseudo-labels) plus the fairness penalty, and the
final score is baseline + offset in score space (logits for classification).
Gap penalties are the one exception since they are defined through labels;
requesting one on unlabeled adjustment data is an explicit error.
"""

from dataclasses import dataclass, replace

import numpy as np

from .datasets import Dataset
from .fairness import (
    AdversarialPenalty,
    combined_grad_hess,
    fresh_adversary,
    make_penalty,
)
from .learners import (
    BoostedTrees,
    DivergenceError,
    LogisticRegressionGD,
    OrdinaryLeastSquares,
    _augment,
)
from .losses import ScoreVector, bce, mse, sigmoid


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run depends on.

    learner is "boosted" or "linear". Linear classification and all linear
    fairness-penalized fits run full-batch gradient descent to gd_tol;
    linear regression baselines use the closed-form least-squares solution.
    stretch multiplies n_rounds and divides learning_rate, trading rounds
    for step size at fixed total movement.
    """

    task: str = "clf"
    learner: str = "boosted"
    lam: float = 0.0
    penalty: str = "adversarial"
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 3
    l2_reg: float = 1.0
    min_child_weight: float = 1.0
    stretch: int = 1
    adv_step_size: float = 0.1
    adv_steps_per_round: int = 5
    gd_tol: float = 1e-10
    gd_max_steps: int = 2_000_000
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("reg", "clf"):
            raise ValueError(f"task must be 'reg' or 'clf', got {self.task!r}")
        if self.learner not in ("boosted", "linear"):
            raise ValueError(f"learner must be 'boosted' or 'linear', got {self.learner!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.stretch < 1:
            raise ValueError("stretch must be >= 1")

    def boosted_learner(self, base_score=None):
        return BoostedTrees(
            objective="bce" if self.task == "clf" else "mse",
            n_rounds=self.n_rounds * self.stretch,
            learning_rate=self.learning_rate / self.stretch,
            max_depth=self.max_depth,
            l2_reg=self.l2_reg,
            min_child_weight=self.min_child_weight,
            base_score=base_score,
        )


@dataclass(frozen=True)
class TrainedTriple:
    """Baseline f, joint model h, adjuster g, and the pseudo-labels g saw."""

    f: object
    h: object
    g: object
    lam_joint: float
    lam_adjuster: float
    pseudo_labels: np.ndarray


class ConvergenceError(RuntimeError):
    """Gradient descent stopped at max steps above the requested tolerance."""


def _primary_eval(task, u, target):
    return bce(u, target) if task == "clf" else mse(u, target)


def _gap_direction(protected):
    g1 = protected == 1.0
    n1 = int(np.sum(g1))
    n2 = len(protected) - n1
    return np.where(g1, 1.0 / max(n1, 1), -1.0 / max(n2, 1))


def fit_linear_gd(
    X,
    task,
    target,
    offset=None,
    penalty=None,
    protected=None,
    tol=1e-10,
    max_steps=2_000_000,
    strict=True,
):
    """Minimize primary(offset + A beta, target) + lam * penalty by fixed-step
    gradient descent, step 1/L from an explicit curvature bound.

    Returns a fitted linear model carrying grad_norm_ and gd_steps_. With
    strict=True a run that exhausts max_steps above tol raises; adversarial
    penalties make the objective a moving target, so callers pass
    strict=False there and read grad_norm_ instead.
    """
    X = np.asarray(X, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    A = _augment(X)
    n, p = A.shape
    offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=np.float64)

    lam_max = float(np.linalg.eigvalsh(A.T @ A)[-1])
    primary_curv = 2.0 if task == "reg" else 0.25
    lipschitz = primary_curv * lam_max
    adversarial = isinstance(penalty, AdversarialPenalty)
    if penalty is not None and not adversarial and penalty.kind == "overprediction_gap_squared":
        c = _gap_direction(protected)
        lipschitz += 2.0 * penalty.lam * float(np.sum((A.T @ c) ** 2))

    beta = np.zeros(p)
    grad_norm = np.inf
    steps = 0
    for k in range(max_steps):
        u = offset + A @ beta
        if task == "clf":
            grad_u = sigmoid(u) - target
        else:
            grad_u = 2.0 * (u - target)
        if penalty is not None and penalty.lam != 0.0:
            _, pgrad = penalty.value_and_grad(u, protected)
            grad_u = grad_u + penalty.lam * pgrad
        grad = A.T @ grad_u
        grad_norm = float(np.linalg.norm(grad))
        if not np.isfinite(grad_norm):
            raise DivergenceError(f"gradient became non-finite at step {k}")
        if grad_norm <= tol:
            break
        step_bound = lipschitz
        if adversarial:
            step_bound += 0.25 * penalty.lam * penalty.adversary.a**2 * lam_max
        beta = beta - grad / max(step_bound, 1e-12)
        steps = k + 1
        if adversarial:
            penalty.round_update(offset + A @ beta, protected)
    else:
        if strict:
            raise ConvergenceError(
                f"gradient norm {grad_norm:.3e} > tol {tol:.3e} after {max_steps} steps"
            )

    if task == "clf":
        model = LogisticRegressionGD()
        model.score_scale_ = "logit"
    else:
        model = OrdinaryLeastSquares()
        model.score_scale_ = "raw"
    model.coef_ = beta
    model.n_features_in_ = X.shape[1]
    model.grad_norm_ = grad_norm
    model.gd_steps_ = steps
    return model


def _make_run_penalty(cfg, lam, protected, labels, context):
    if lam == 0.0 and cfg.penalty != "adversarial":
        return None
    adversary = None
    if cfg.penalty == "adversarial":
        adversary = fresh_adversary(
            protected,
            adv_step_size=cfg.adv_step_size,
            adv_steps_per_round=cfg.adv_steps_per_round,
        )
    elif labels is None:
        raise ValueError(
            f"penalty {cfg.penalty!r} needs true labels but {context} has none; "
            "use the adversarial penalty for label-free adjustment"
        )
    return make_penalty(cfg.penalty, lam, y=labels, adversary=adversary)


def _fit_boosted(X, protected, cfg, penalty, target, offset, base_score):
    n = X.shape[0]
    offset_vec = np.zeros(n) if offset is None else offset
    state = {"last_u": None}

    def grad_fn(g_scores, r):
        u = offset_vec + g_scores
        if r > 0 and isinstance(penalty, AdversarialPenalty):
            penalty.round_update(state["last_u"], protected)
        primary = _primary_eval(cfg.task, u, target)
        batch = combined_grad_hess(primary, penalty, u, protected)
        state["last_u"] = u
        return batch

    model = cfg.boosted_learner().fit_gradients(
        X,
        grad_fn,
        base_score=base_score,
        score_scale="logit" if cfg.task == "clf" else "raw",
    )
    if isinstance(penalty, AdversarialPenalty):
        penalty.round_update(offset_vec + model.train_scores_, protected)
    model.penalty_ = penalty
    return model


def _base_score_for(task, y):
    if task == "clf":
        rate = float(np.clip(np.mean(y), 1e-12, 1.0 - 1e-12))
        return float(np.log(rate) - np.log1p(-rate))
    return float(np.mean(y))


def fit_baseline(train: Dataset, cfg: TrainConfig):
    """Fit the plain performance-only model; any configured lam is ignored."""
    if train.labels is None:
        raise ValueError("baseline training needs labels")
    y = train.labels
    if cfg.learner == "linear":
        if cfg.task == "reg":
            return OrdinaryLeastSquares().fit(train.features, y)
        return fit_linear_gd(
            train.features, "clf", y, tol=cfg.gd_tol, max_steps=cfg.gd_max_steps
        )
    return _fit_boosted(
        train.features,
        train.protected,
        cfg,
        penalty=None,
        target=y,
        offset=None,
        base_score=_base_score_for(cfg.task, y),
    )


def fit_joint(train: Dataset, cfg: TrainConfig):
    """Fit one model on primary loss + lam * fairness penalty against true
    labels, updating the adversary once per boosting round."""
    if train.labels is None:
        raise ValueError("joint training needs labels")
    y = train.labels
    penalty = _make_run_penalty(cfg, cfg.lam, train.protected, y, "training data")
    if cfg.learner == "linear":
        model = fit_linear_gd(
            train.features,
            cfg.task,
            y,
            penalty=penalty,
            protected=train.protected,
            tol=cfg.gd_tol,
            max_steps=cfg.gd_max_steps,
            strict=not isinstance(penalty, AdversarialPenalty),
        )
        model.penalty_ = penalty
        return model
    return _fit_boosted(
        train.features,
        train.protected,
        cfg,
        penalty,
        target=y,
        offset=None,
        base_score=_base_score_for(cfg.task, y),
    )


def pseudo_labels(baseline, X, task):
    """The baseline's own predictions in label space."""
    scores = baseline.predict(X)
    return sigmoid(scores) if task == "clf" else scores


def fit_adjuster(baseline, adjust: Dataset, cfg: TrainConfig):
    """Fit the offset model g against the fixed baseline.

    Uses only features, the protected attribute, and the baseline's scores;
    labels on adjust are ignored unless a gap penalty demands them. g is
    trained in score space with base score 0 and is added to the baseline's
    score before the link.
    """
    X = adjust.features
    f_scores = baseline.predict(X)
    yhat = pseudo_labels(baseline, X, cfg.task)
    gap_labels = adjust.labels if cfg.penalty != "adversarial" else None
    penalty = _make_run_penalty(cfg, cfg.lam, adjust.protected, gap_labels, "adjustment data")
    target = yhat
    if cfg.learner == "linear":
        model = fit_linear_gd(
            X,
            cfg.task,
            target,
            offset=f_scores,
            penalty=penalty,
            protected=adjust.protected,
            tol=cfg.gd_tol,
            max_steps=cfg.gd_max_steps,
            strict=not isinstance(penalty, AdversarialPenalty),
        )
    else:
        model = _fit_boosted(
            X,
            adjust.protected,
            cfg,
            penalty,
            target=target,
            offset=f_scores,
            base_score=0.0,
        )
    model.penalty_ = penalty
    model.pseudo_labels_ = yhat
    return model


def predict_adjusted(f, g, X) -> ScoreVector:
    """Baseline-plus-offset scores (logit addition for classification)."""
    values = f.predict(X) + g.predict(X)
    return ScoreVector(values=values, scale=f.score_scale_)


def fit_triple(train: Dataset, cfg: TrainConfig, lam_joint=None, lam_adjuster=None) -> TrainedTriple:
    """Baseline, joint, and adjuster on the same training data."""
    lam_joint = cfg.lam if lam_joint is None else lam_joint
    lam_adjuster = cfg.lam if lam_adjuster is None else lam_adjuster
    f = fit_baseline(train, cfg)
    h = fit_joint(train, replace(cfg, lam=lam_joint))
    g = fit_adjuster(f, train, replace(cfg, lam=lam_adjuster))
    return TrainedTriple(
        f=f,
        h=h,
        g=g,
        lam_joint=lam_joint,
        lam_adjuster=lam_adjuster,
        pseudo_labels=g.pseudo_labels_,
    )
