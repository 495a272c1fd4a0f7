"""Experiment orchestration: seeded cross-validation sweeps over the three
training methods, strength search against a disparate-impact target, and
report emission.

Reports are plain CSV plus an aligned text table; floats are written with
repr so identical specs produce byte-identical files. Cells run sequentially
in sorted (seed, fold) order, which keeps aggregation deterministic.
"""

import csv
import io
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datasets import Dataset, load_named_dataset, make_folds, split
from .metrics import aggregate, delta_loss, evaluate
from .train import TrainConfig, fit_adjuster, fit_baseline, fit_joint

METHODS = ("baseline", "joint", "adjuster")
DEFAULT_GRID = (0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0)


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproducible experiment: dataset, CV layout, methods, strengths.

    lam=None triggers a per-method linear search over lambda_grid for the
    strength whose mean CV disparate impact lands closest to lambda_target,
    evaluated on the first search_seeds seeds only.
    """

    dataset: str
    seeds: tuple = (0, 1, 2, 3, 4)
    k: int = 5
    methods: tuple = METHODS
    config: TrainConfig = field(default_factory=TrainConfig)
    lam: float | None = None
    lambda_target: float = 1.0
    lambda_grid: tuple | None = None
    search_seeds: int = 2
    out_dir: str | None = None
    manifest: str | None = None
    data_dir: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.k < 2:
            raise ValueError("k must be >= 2")


@dataclass(frozen=True)
class CellResult:
    seed: int
    fold: int
    method: str
    lam: float
    n_test: int
    accuracy: float
    disparate_impact: float
    di_defined: bool
    delta_loss: float | None
    error: str | None = None


@dataclass(frozen=True)
class LambdaSearchResult:
    method: str
    lam: float
    target: float
    curve: tuple  # of (lam, mean_di, mean_accuracy)


@dataclass(frozen=True)
class ExperimentReport:
    spec: ExperimentSpec
    cells: tuple
    lam_joint: float
    lam_adjuster: float
    searches: tuple = ()

    def method_values(self, method, attr):
        out = []
        for c in self.cells:
            if c.method != method or c.error is not None:
                continue
            v = getattr(c, attr)
            if attr == "disparate_impact" and not c.di_defined:
                continue
            if v is None or not np.isfinite(v):
                continue
            out.append(v)
        return out

    def aggregate_metric(self, method, attr):
        return aggregate(self.method_values(method, attr))

    def delta_loss_values(self):
        seen = set()
        out = []
        for c in self.cells:
            key = (c.seed, c.fold)
            if c.delta_loss is None or key in seen or c.error is not None:
                continue
            seen.add(key)
            out.append(c.delta_loss)
        return out


def default_lambda_grid(penalty_kind, n):
    """Gap penalties see per-example gradients of order 1/n, so their grid
    is rescaled by n to cover the same effective strength range."""
    if penalty_kind == "adversarial":
        return DEFAULT_GRID
    return tuple(v * n for v in DEFAULT_GRID)


def _fit_cell_models(train_ds, cfg, methods, lam_joint, lam_adjuster):
    models = {}
    need_baseline = "baseline" in methods or "adjuster" in methods
    if need_baseline:
        models["baseline"] = fit_baseline(train_ds, cfg)
    if "joint" in methods:
        models["joint"] = fit_joint(train_ds, replace(cfg, lam=lam_joint))
    if "adjuster" in methods:
        models["adjuster"] = fit_adjuster(
            models["baseline"], train_ds, replace(cfg, lam=lam_adjuster)
        )
    return models


def _cell_scores(models, method, X):
    if method == "adjuster":
        return models["baseline"].predict(X) + models["adjuster"].predict(X)
    return models[method].predict(X)


def lambda_search(dataset: Dataset, method, spec: ExperimentSpec) -> LambdaSearchResult:
    """Evaluate mean CV disparate impact along the grid; return the strength
    closest to the target and the full (lam, DI, accuracy) curve."""
    if method not in ("joint", "adjuster"):
        raise ValueError("lambda_search applies to 'joint' or 'adjuster'")
    grid = spec.lambda_grid
    if grid is None:
        grid = default_lambda_grid(spec.config.penalty, dataset.n)
    if not grid:
        raise ValueError("lambda grid must be non-empty")
    grid = tuple(sorted(grid))
    seeds = spec.seeds[: max(1, min(spec.search_seeds, len(spec.seeds)))]

    folds = []
    for seed in seeds:
        plan = make_folds(dataset.n, spec.k, seed)
        for fold in range(spec.k):
            tr, te = split(dataset, plan, fold)
            folds.append((tr, te))
    baselines = None
    if method == "adjuster":
        baselines = [fit_baseline(tr, spec.config) for tr, _ in folds]

    curve = []
    for lam in grid:
        dis, accs = [], []
        for i, (tr, te) in enumerate(folds):
            if method == "joint":
                model = fit_joint(tr, replace(spec.config, lam=lam))
                scores = model.predict(te.features)
            else:
                g = fit_adjuster(baselines[i], tr, replace(spec.config, lam=lam))
                scores = baselines[i].predict(te.features) + g.predict(te.features)
            res = evaluate(scores, te)
            accs.append(res.accuracy)
            if res.di_defined:
                dis.append(res.disparate_impact)
        mean_di = float(np.mean(dis)) if dis else np.nan
        curve.append((lam, mean_di, float(np.mean(accs))))

    finite = [(lam, di, acc) for lam, di, acc in curve if np.isfinite(di)]
    if not finite:
        raise RuntimeError("disparate impact undefined at every grid point")
    best = min(finite, key=lambda row: (abs(row[1] - spec.lambda_target), row[0]))
    if abs(best[1] - spec.lambda_target) > 0.25:
        warnings.warn(
            f"{method}: no grid strength reaches disparate impact within 0.25 of "
            f"{spec.lambda_target} (best {best[1]:.3f} at lam={best[0]:g}); using best effort"
        )
    return LambdaSearchResult(method=method, lam=best[0], target=spec.lambda_target, curve=tuple(curve))


def run_experiment(spec: ExperimentSpec, dataset: Dataset | None = None) -> ExperimentReport:
    """Fit and evaluate every (seed, fold, method) cell; optionally write
    report files. A training failure marks its cell and is carried in the
    report rather than dropped."""
    if dataset is None:
        dataset = load_named_dataset(spec.dataset, manifest_path=spec.manifest, data_dir=spec.data_dir)

    searches = []
    lam_joint = lam_adjuster = spec.lam if spec.lam is not None else 0.0
    if spec.lam is None:
        if "joint" in spec.methods:
            res = lambda_search(dataset, "joint", spec)
            searches.append(res)
            lam_joint = res.lam
        if "adjuster" in spec.methods:
            res = lambda_search(dataset, "adjuster", spec)
            searches.append(res)
            lam_adjuster = res.lam

    cells = []
    for seed in spec.seeds:
        plan = make_folds(dataset.n, spec.k, seed)
        for fold in range(spec.k):
            train_ds, test_ds = split(dataset, plan, fold)
            try:
                models = _fit_cell_models(
                    train_ds, spec.config, spec.methods, lam_joint, lam_adjuster
                )
                dl = None
                if spec.config.task == "clf" and all(m in models for m in ("baseline", "joint", "adjuster")):
                    f = models["baseline"].predict(test_ds.features)
                    h = models["joint"].predict(test_ds.features)
                    g = models["adjuster"].predict(test_ds.features)
                    dl = delta_loss(f, h, g, test_ds.labels)
                for method in spec.methods:
                    res = evaluate(_cell_scores(models, method, test_ds.features), test_ds)
                    lam_used = {"baseline": 0.0, "joint": lam_joint, "adjuster": lam_adjuster}[method]
                    cells.append(
                        CellResult(
                            seed=seed,
                            fold=fold,
                            method=method,
                            lam=lam_used,
                            n_test=test_ds.n,
                            accuracy=res.accuracy,
                            disparate_impact=res.disparate_impact,
                            di_defined=res.di_defined,
                            delta_loss=dl,
                        )
                    )
            except Exception as exc:  # recorded, not dropped
                for method in spec.methods:
                    cells.append(
                        CellResult(
                            seed=seed,
                            fold=fold,
                            method=method,
                            lam=np.nan,
                            n_test=test_ds.n,
                            accuracy=np.nan,
                            disparate_impact=np.nan,
                            di_defined=False,
                            delta_loss=None,
                            error=f"{type(exc).__name__}: {exc}",
                        )
                    )

    report = ExperimentReport(
        spec=spec,
        cells=tuple(cells),
        lam_joint=lam_joint,
        lam_adjuster=lam_adjuster,
        searches=tuple(searches),
    )
    if spec.out_dir is not None:
        write_report(report, spec.out_dir)
    return report


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and not np.isfinite(x):
        return "nan"
    return repr(x) if isinstance(x, float) else str(x)


def report_rows_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "seed",
            "fold",
            "method",
            "lam",
            "n_test",
            "accuracy",
            "disparate_impact",
            "di_defined",
            "delta_loss",
            "error",
        ]
    )
    for c in report.cells:
        writer.writerow(
            [
                c.seed,
                c.fold,
                c.method,
                _fmt(c.lam),
                c.n_test,
                _fmt(c.accuracy),
                _fmt(c.disparate_impact),
                int(c.di_defined),
                _fmt(c.delta_loss),
                c.error or "",
            ]
        )
    return buf.getvalue()


def summary_rows(report: ExperimentReport):
    rows = []
    for method in report.spec.methods:
        for attr, label in (("accuracy", "accuracy"), ("disparate_impact", "disparate_impact")):
            values = report.method_values(method, attr)
            if len(values) >= 2:
                agg = report.aggregate_metric(method, attr)
                rows.append((method, label, agg.mean, agg.ci95_halfwidth, agg.n_runs))
    dls = report.delta_loss_values()
    if len(dls) >= 2:
        agg = aggregate(dls)
        rows.append(("triple", "delta_loss", agg.mean, agg.ci95_halfwidth, agg.n_runs))
    return rows


def summary_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "metric", "mean", "ci95_halfwidth", "n_runs"])
    for method, metric, mean, hw, n in summary_rows(report):
        writer.writerow([method, metric, _fmt(float(mean)), _fmt(float(hw)), n])
    return buf.getvalue()


def summary_table(report: ExperimentReport) -> str:
    labels = {
        ("baseline", "accuracy"): "baseline accuracy",
        ("joint", "accuracy"): "joint accuracy",
        ("adjuster", "accuracy"): "adjuster accuracy",
        ("baseline", "disparate_impact"): "baseline disparate impact",
        ("joint", "disparate_impact"): "joint disparate impact",
        ("adjuster", "disparate_impact"): "adjuster disparate impact",
        ("triple", "delta_loss"): "delta loss",
    }
    order = {k: i for i, k in enumerate(labels)}
    rows = sorted(
        summary_rows(report),
        key=lambda r: order.get((r[0], r[1]), 99),
    )
    lines = [f"dataset: {report.spec.dataset}"]
    for method, metric, mean, hw, n in rows:
        label = labels.get((method, metric), f"{method} {metric}")
        lines.append(f"{label:<28} {mean: .4f} +/- {hw:.4f}  (n={n})")
    lines.append(f"{'lambda (joint)':<28} {report.lam_joint:g}")
    lines.append(f"{'lambda (adjuster)':<28} {report.lam_adjuster:g}")
    return "\n".join(lines) + "\n"


def tradeoff_points(report: ExperimentReport):
    """One (method, seed) point: fold-mean accuracy and disparate impact."""
    points = []
    for method in sorted(report.spec.methods):
        for seed in sorted(set(c.seed for c in report.cells)):
            accs, dis = [], []
            for c in report.cells:
                if c.method != method or c.seed != seed or c.error is not None:
                    continue
                accs.append(c.accuracy)
                if c.di_defined:
                    dis.append(c.disparate_impact)
            if accs:
                points.append(
                    (
                        method,
                        seed,
                        float(np.mean(accs)),
                        float(np.mean(dis)) if dis else np.nan,
                    )
                )
    return points


def tradeoff_csv_from_cells(cell_rows) -> str:
    """Recompute tradeoff points from a parsed report.csv (list of dicts)."""
    by_key = {}
    for row in cell_rows:
        if row.get("error"):
            continue
        key = (row["method"], int(row["seed"]))
        acc = float(row["accuracy"])
        entry = by_key.setdefault(key, {"acc": [], "di": []})
        entry["acc"].append(acc)
        if int(row["di_defined"]):
            entry["di"].append(float(row["disparate_impact"]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "seed", "accuracy", "disparate_impact"])
    for method, seed in sorted(by_key):
        entry = by_key[(method, seed)]
        di = float(np.mean(entry["di"])) if entry["di"] else np.nan
        writer.writerow([method, seed, _fmt(float(np.mean(entry["acc"]))), _fmt(di)])
    return buf.getvalue()


def emit_tradeoff(report: ExperimentReport, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "seed", "accuracy", "disparate_impact"])
    for method, seed, acc, di in tradeoff_points(report):
        writer.writerow([method, seed, _fmt(acc), _fmt(di)])
    Path(path).write_text(buf.getvalue())


def write_report(report: ExperimentReport, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report_rows_csv(report))
    (out / "summary.csv").write_text(summary_csv(report))
    (out / "table.txt").write_text(summary_table(report))
    for search in report.searches:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lam", "mean_disparate_impact", "mean_accuracy"])
        for lam, di, acc in search.curve:
            writer.writerow([_fmt(float(lam)), _fmt(float(di)), _fmt(float(acc))])
        (out / f"lambda_curve_{search.method}.csv").write_text(buf.getvalue())
