"""Numerical verification of the optimality identities and bounds relating
the baseline, jointly penalized, and adjusted models.

Identities are checked unconditionally to near machine precision. Bounds
hold only for exactly optimized convex models with matched fairness levels,
so the randomized suites construct that regime: linear or logistic models
run to gradient norm <= 1e-10 with the squared-gap penalty, and the
adjuster's penalty strength is bisected until its fairness value matches the
joint model's within 1e-6.
"""

from dataclasses import dataclass, replace

import numpy as np

from .datasets import Dataset
from .fairness import make_penalty
from .losses import bce, bce_identity_gap, mse, sigmoid
from .train import ConvergenceError, TrainConfig, fit_adjuster, fit_baseline, fit_joint
from .validation import as_float_vector, check_same_length


def check_prop1_identity(f_scores, g_scores, y) -> float:
    """|direct loss change - quadratic expansion| for adding g to f."""
    f = as_float_vector(np.asarray(f_scores, dtype=np.float64), "f")
    g = as_float_vector(np.asarray(g_scores, dtype=np.float64), "g")
    y = as_float_vector(y, "y")
    check_same_length((f, "f"), (g, "g"), (y, "y"))
    lhs = mse(f + g, y).value - mse(f, y).value
    rhs = float(g @ g) + 2.0 * float((f - y) @ g)
    return abs(lhs - rhs)


def check_prop2_bound(f, h, g, y):
    """(lhs, rhs, slack) for the squared-error comparison of adjusted vs
    jointly trained predictions; slack >= 0 in the matched optimal regime."""
    f = as_float_vector(np.asarray(f, dtype=np.float64), "f")
    h = as_float_vector(np.asarray(h, dtype=np.float64), "h")
    g = as_float_vector(np.asarray(g, dtype=np.float64), "g")
    y = as_float_vector(y, "y")
    check_same_length((f, "f"), (h, "h"), (g, "g"), (y, "y"))
    lhs = mse(f + g, y).value - mse(h, y).value
    rhs = 2.0 * float((f - y) @ (g - (h - f)))
    return lhs, rhs, rhs - lhs


def check_prop4_tradeoff(g_scores, la_before, la_after, lam):
    """Does sum(g^2) <= lam * (fairness drop), up to float tolerance?

    Returns (holds, margin) where margin = lam * drop - sum(g^2); a
    non-converged adjuster can legitimately return (False, negative).
    """
    g = as_float_vector(np.asarray(g_scores, dtype=np.float64), "g")
    gsq = float(g @ g)
    margin = lam * (la_before - la_after) - gsq
    tol = 1e-6 * (1.0 + gsq)
    return margin >= -tol, margin


def check_prop5_bound(f, h, g, y):
    """(lhs, rhs, slack) for the cross-entropy comparison.

    Re-verifies the soft-label decomposition for both score vectors first;
    a residual there means the loss implementation is broken, which would
    make the bound meaningless.
    """
    f = as_float_vector(np.asarray(f, dtype=np.float64), "f")
    h = as_float_vector(np.asarray(h, dtype=np.float64), "h")
    g = as_float_vector(np.asarray(g, dtype=np.float64), "g")
    y = as_float_vector(y, "y")
    check_same_length((f, "f"), (h, "h"), (g, "g"), (y, "y"))
    yhat = sigmoid(f)
    base = bce(f + g, y).value
    for u in (f + g, h):
        gap = bce_identity_gap(u, yhat, y, f)
        if abs(gap) > 1e-9 * (1.0 + abs(bce(u, y).value)):
            raise ValueError(f"cross-entropy identity violated: residual {gap:.3e}")
    lhs = base
    rhs = bce(h, y).value + float((yhat - y) @ (g - (h - f)))
    return lhs, rhs, rhs - lhs


# ---------------------------------------------------------------------------
# matched-fairness construction
# ---------------------------------------------------------------------------


def equalize_fairness(adjusted_fairness, target, tol=1e-6, max_expand=80, max_bisect=200):
    """Find lam with |fairness(lam) - target| <= tol by bracketed bisection.

    adjusted_fairness(lam) must return (fairness value, payload) and be
    non-increasing in lam. Returns (lam, payload).
    """
    value, payload = adjusted_fairness(0.0)
    if abs(value - target) <= tol:
        return 0.0, payload
    if value < target:
        raise ValueError(
            f"unpenalized fairness {value:.6g} already below target {target:.6g}"
        )
    lo, hi = 0.0, 1.0
    value, payload = adjusted_fairness(hi)
    expansions = 0
    while value > target:
        if abs(value - target) <= tol:
            return hi, payload
        if expansions >= max_expand:
            raise ConvergenceError(f"no lam up to {hi:g} reaches fairness {target:.6g}")
        lo, hi = hi, hi * 2.0
        value, payload = adjusted_fairness(hi)
        expansions += 1
    if abs(value - target) <= tol:
        return hi, payload
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        value, payload = adjusted_fairness(mid)
        if abs(value - target) <= tol:
            return mid, payload
        if value > target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"bisection stalled; last fairness {value:.6g} vs {target:.6g}")


def _ensure_both_groups(rng, n, rate):
    s = (rng.random(n) < rate).astype(np.float64)
    if s.sum() == 0:
        s[int(rng.integers(n))] = 1.0
    elif s.sum() == n:
        s[int(rng.integers(n))] = 0.0
    return s


def synthetic_group_regression(rng, n=400, d=4, group_rate=0.45, group_shift=0.8, noise=0.5):
    """Regression data where both a feature and the noise carry the group."""
    s = _ensure_both_groups(rng, n, group_rate)
    X = rng.standard_normal((n, d))
    X[:, 0] = s + 0.5 * rng.standard_normal(n)
    w = rng.standard_normal(d)
    y = X @ w + group_shift * s + noise * rng.standard_normal(n)
    return X, y, s


def synthetic_group_classification(rng, n=400, d=4, group_rate=0.45, group_shift=1.2, scale=1.0):
    """Noisy, non-separable binary labels with a group-shifted logit."""
    s = _ensure_both_groups(rng, n, group_rate)
    X = rng.standard_normal((n, d))
    X[:, 0] = s + 0.5 * rng.standard_normal(n)
    w = rng.standard_normal(d) / np.sqrt(d)
    logits = scale * (X @ w) + group_shift * (s - 0.5)
    y = (rng.random(n) < sigmoid(logits)).astype(np.float64)
    return X, y, s


def _dataset(X, y, s):
    return Dataset(features=X, labels=y, protected=s, favorable_label=1)


def _gap_sq_value(u, protected, y):
    penalty = make_penalty("overprediction_gap_squared", 1.0, y=y)
    value, _ = penalty.value_and_grad(u, protected)
    return value


def _linear_cfg(task, lam):
    return TrainConfig(
        task=task,
        learner="linear",
        lam=lam,
        penalty="overprediction_gap_squared",
        gd_tol=1e-10,
    )


@dataclass(frozen=True)
class BoundInstance:
    lam_joint: float
    lam_adjuster: float
    lhs: float
    rhs: float
    slack: float


def run_prop2_instance(seed, n=300, d=4, lam_joint=2.0) -> BoundInstance:
    rng = np.random.Generator(np.random.PCG64(seed))
    X, y, s = synthetic_group_regression(rng, n=n, d=d)
    data = _dataset(X, y, s)
    f = fit_baseline(data, _linear_cfg("reg", 0.0))
    h = fit_joint(data, _linear_cfg("reg", lam_joint))
    f_scores = f.predict(X)
    h_scores = h.predict(X)
    target = _gap_sq_value(h_scores, s, y)

    def adjusted_fairness(lam):
        g = fit_adjuster(f, data, _linear_cfg("reg", lam))
        g_scores = g.predict(X)
        return _gap_sq_value(f_scores + g_scores, s, y), g_scores

    lam_g, g_scores = equalize_fairness(adjusted_fairness, target)
    lhs, rhs, slack = check_prop2_bound(f_scores, h_scores, g_scores, y)
    return BoundInstance(lam_joint, lam_g, lhs, rhs, slack)


def run_prop5_instance(seed, n=300, d=4, lam_joint=2.0) -> BoundInstance:
    rng = np.random.Generator(np.random.PCG64(seed))
    X, y, s = synthetic_group_classification(rng, n=n, d=d)
    data = _dataset(X, y, s)
    f = fit_baseline(data, _linear_cfg("clf", 0.0))
    h = fit_joint(data, _linear_cfg("clf", lam_joint))
    f_scores = f.predict(X)
    h_scores = h.predict(X)
    target = _gap_sq_value(h_scores, s, y)

    def adjusted_fairness(lam):
        g = fit_adjuster(f, data, _linear_cfg("clf", lam))
        g_scores = g.predict(X)
        return _gap_sq_value(f_scores + g_scores, s, y), g_scores

    lam_g, g_scores = equalize_fairness(adjusted_fairness, target)
    lhs, rhs, slack = check_prop5_bound(f_scores, h_scores, g_scores, y)
    return BoundInstance(lam_joint, lam_g, lhs, rhs, slack)


def run_prop4_instance(seed, n=300, d=4, lam=None):
    rng = np.random.Generator(np.random.PCG64(seed))
    if lam is None:
        lam = float(10.0 ** rng.uniform(-1, 2))
    X, y, s = synthetic_group_regression(rng, n=n, d=d)
    data = _dataset(X, y, s)
    f = fit_baseline(data, _linear_cfg("reg", 0.0))
    g = fit_adjuster(f, data, _linear_cfg("reg", lam))
    f_scores = f.predict(X)
    g_scores = g.predict(X)
    la_before = _gap_sq_value(f_scores, s, y)
    la_after = _gap_sq_value(f_scores + g_scores, s, y)
    holds, margin = check_prop4_tradeoff(g_scores, la_before, la_after, lam)
    return holds, margin


def run_prop3_equivalence(seed=0, n=500, d=5, lam=3.0):
    """Closed-form baseline vs gradient-descent joint/adjuster agreement.

    Returns coefficient vectors and the two max-abs differences that the
    equivalence predicts vanish: ||beta_g - (beta_a - beta_f)||_inf and the
    gap between adjusted and joint predictions.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    X, y, s = synthetic_group_regression(rng, n=n, d=d)
    data = _dataset(X, y, s)
    f = fit_baseline(data, _linear_cfg("reg", 0.0))
    h = fit_joint(data, _linear_cfg("reg", lam))
    g = fit_adjuster(f, data, _linear_cfg("reg", lam))
    coef_diff = float(np.max(np.abs(g.coef_ - (h.coef_ - f.coef_))))
    pred_diff = float(np.max(np.abs(f.predict(X) + g.predict(X) - h.predict(X))))
    return {
        "beta_f": f.coef_,
        "beta_a": h.coef_,
        "beta_g": g.coef_,
        "max_coef_diff": coef_diff,
        "max_pred_diff": pred_diff,
    }


# ---------------------------------------------------------------------------
# report for the verify-theory command
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckRow:
    name: str
    value: float
    threshold: float
    op: str  # "<=" or ">="
    passed: bool
    hard: bool


def _row(name, value, threshold, op, hard=False):
    passed = value <= threshold if op == "<=" else value >= threshold
    return CheckRow(name, value, threshold, op, bool(passed), hard)


def verify_theory(seed=0, n_random=1000, n_bound_instances=5):
    """Run every check on synthetic data; returns a list of CheckRow."""
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = []

    worst = 0.0
    for _ in range(n_random):
        n = 100
        scale = float(10.0 ** rng.uniform(-1, 1))
        f = scale * rng.standard_normal(n)
        g = scale * rng.standard_normal(n)
        y = scale * rng.standard_normal(n)
        lhs = mse(f + g, y).value - mse(f, y).value
        disc = check_prop1_identity(f, g, y)
        worst = max(worst, disc / (1.0 + abs(lhs)))
    rows.append(_row("squared-error change identity", worst, 1e-9, "<=", hard=True))

    worst = 0.0
    for _ in range(n_random):
        n = 100
        u = 3.0 * rng.standard_normal(n)
        fl = 3.0 * rng.standard_normal(n)
        y = (rng.random(n) < 0.5).astype(np.float64)
        gap = bce_identity_gap(u, sigmoid(fl), y, fl)
        worst = max(worst, abs(gap) / (1.0 + abs(bce(u, y).value)))
    rows.append(_row("cross-entropy soft-label identity", worst, 1e-9, "<=", hard=True))

    eq = run_prop3_equivalence(seed=seed)
    rows.append(_row("linear joint/adjuster coefficient match", eq["max_coef_diff"], 1e-6, "<="))
    rows.append(_row("linear joint/adjuster prediction match", eq["max_pred_diff"], 1e-5, "<="))

    slack2 = min(
        run_prop2_instance(seed * 1000 + i).slack for i in range(n_bound_instances)
    )
    rows.append(_row("squared-error bound slack (matched fairness)", slack2, -1e-4, ">="))

    slack5 = min(
        run_prop5_instance(seed * 2000 + i).slack for i in range(n_bound_instances)
    )
    rows.append(_row("cross-entropy bound slack (matched fairness)", slack5, -1e-4, ">="))

    margin4 = min(run_prop4_instance(seed * 3000 + i)[1] for i in range(n_bound_instances))
    rows.append(_row("adjustment-size / fairness-drop margin", margin4, -1e-6, ">="))

    return rows


def format_report(rows):
    lines = []
    width = max(len(r.name) for r in rows)
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{r.name:<{width}}  {r.value: .3e} {r.op} {r.threshold: .1e}  {status}"
        )
    return "\n".join(lines)
