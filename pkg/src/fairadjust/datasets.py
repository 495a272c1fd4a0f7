"""Tabular dataset loading, protected-attribute encoding, and seeded
cross-validation folds.

CSV files need a header row. A schema names exactly one label column and one
protected column; every other column is a feature. Columns listed in
``categorical`` are one-hot encoded with lexicographically ordered category
values so the column layout is identical across runs. Missing values are
rejected at load time.

Fold assignment shuffles indices with a PCG64 generator seeded by a 64-bit
integer (numpy ``Generator.permutation``) and then deals folds round-robin,
so a (seed, n, k) triple reproduces the same plan bit-exactly.
"""

import configparser
import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DATA_DIR_ENV = "FAIRADJUST_DATA_DIR"
MANIFEST_NAME = "datasets.manifest"


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus labels and a binary protected attribute.

    labels may be None for an unlabeled adjustment set. favorable_label
    names which class counts as the favorable outcome for fairness metrics.
    empty_group_warning is set automatically when one protected group is
    empty (possible after splitting); loaders refuse such data outright.
    """

    features: np.ndarray
    labels: np.ndarray | None
    protected: np.ndarray
    favorable_label: int
    feature_names: tuple = ()
    empty_group_warning: bool = field(default=False, compare=False)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValueError(f"features must be a non-empty matrix, got {features.shape}")
        protected = np.asarray(self.protected, dtype=np.float64)
        if protected.shape != (features.shape[0],):
            raise ValueError("protected length does not match features")
        if not np.all((protected == 0.0) | (protected == 1.0)):
            raise ValueError("protected must contain only 0/1")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.float64)
            if labels.shape != (features.shape[0],):
                raise ValueError("labels length does not match features")
        if self.favorable_label not in (0, 1):
            raise ValueError("favorable_label must be 0 or 1")
        names = tuple(self.feature_names) or tuple(
            f"x{j}" for j in range(features.shape[1])
        )
        if len(names) != features.shape[1]:
            raise ValueError("feature_names length does not match features")
        for arr in (features, protected, labels):
            if arr is not None:
                arr.setflags(write=False)
        n_protected = int(np.sum(protected))
        warn = self.empty_group_warning or n_protected == 0 or n_protected == len(protected)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "protected", protected)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "empty_group_warning", warn)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def take(self, index):
        """Row subset as a new Dataset (favorable convention inherited)."""
        return Dataset(
            features=self.features[index],
            labels=None if self.labels is None else self.labels[index],
            protected=self.protected[index],
            favorable_label=self.favorable_label,
            feature_names=self.feature_names,
        )

    def with_labels(self, labels):
        return Dataset(
            features=self.features,
            labels=labels,
            protected=self.protected,
            favorable_label=self.favorable_label,
            feature_names=self.feature_names,
        )


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for load_csv."""

    label: str
    protected: str
    favorable: int
    task: str
    categorical: tuple = ()

    def __post_init__(self):
        if self.task not in ("reg", "clf"):
            raise ValueError(f"task must be 'reg' or 'clf', got {self.task!r}")
        if self.favorable not in (0, 1):
            raise ValueError("favorable must be 0 or 1")


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic fold ids for one (seed, n, k) triple."""

    seed: int
    k: int
    assignments: np.ndarray

    def __post_init__(self):
        assignments = np.asarray(self.assignments, dtype=np.int64)
        assignments.setflags(write=False)
        object.__setattr__(self, "assignments", assignments)

    @property
    def n(self):
        return len(self.assignments)


def _parse_cell(text, row, col):
    text = text.strip()
    if text == "":
        raise ValueError(f"missing value at row {row}, column {col!r}")
    try:
        value = float(text)
    except ValueError:
        raise ValueError(
            f"unparseable numeric cell {text!r} at row {row}, column {col!r}"
        ) from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite value at row {row}, column {col!r}")
    return value


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Read a CSV into a Dataset, preserving row order.

    Row numbers in error messages are 1-based file lines (the header is
    line 1).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        for col in (schema.label, schema.protected, *schema.categorical):
            if col not in header:
                raise ValueError(f"{path}: column {col!r} not in header")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    col_index = {name: j for j, name in enumerate(header)}
    feature_cols = [
        name for name in header if name not in (schema.label, schema.protected)
    ]
    categorical = set(schema.categorical)

    labels = np.empty(len(rows))
    protected = np.empty(len(rows))
    numeric = {name: np.empty(len(rows)) for name in feature_cols if name not in categorical}
    raw_cats = {name: [] for name in feature_cols if name in categorical}

    for i, row in enumerate(rows):
        line = i + 2
        if len(row) != len(header):
            raise ValueError(f"{path}: row {line} has {len(row)} cells, expected {len(header)}")
        labels[i] = _parse_cell(row[col_index[schema.label]], line, schema.label)
        protected[i] = _parse_cell(row[col_index[schema.protected]], line, schema.protected)
        for name in numeric:
            numeric[name][i] = _parse_cell(row[col_index[name]], line, name)
        for name in raw_cats:
            text = row[col_index[name]].strip()
            if text == "":
                raise ValueError(f"missing value at row {line}, column {name!r}")
            raw_cats[name].append(text)

    if not np.all((protected == 0.0) | (protected == 1.0)):
        bad = int(np.argmax((protected != 0.0) & (protected != 1.0)))
        raise ValueError(
            f"{path}: protected column {schema.protected!r} must be 0/1 "
            f"(row {bad + 2})"
        )
    n_prot = int(protected.sum())
    if n_prot == 0 or n_prot == len(rows):
        raise ValueError(f"{path}: empty protected group")
    if schema.task == "clf" and not np.all((labels == 0.0) | (labels == 1.0)):
        bad = int(np.argmax((labels != 0.0) & (labels != 1.0)))
        raise ValueError(
            f"{path}: label column {schema.label!r} must be 0/1 for task=clf "
            f"(row {bad + 2})"
        )

    columns = []
    names = []
    for name in feature_cols:
        if name in categorical:
            values = raw_cats[name]
            for cat in sorted(set(values)):
                columns.append(np.array([1.0 if v == cat else 0.0 for v in values]))
                names.append(f"{name}={cat}")
        else:
            columns.append(numeric[name])
            names.append(name)

    return Dataset(
        features=np.column_stack(columns),
        labels=labels,
        protected=protected,
        favorable_label=schema.favorable,
        feature_names=tuple(names),
    )


def make_folds(n, k, seed) -> FoldPlan:
    """Shuffle indices by seed, then deal folds round-robin."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    return FoldPlan(seed=seed, k=k, assignments=assignments)


def split(dataset: Dataset, plan: FoldPlan, fold_id):
    """(train, test) for one fold; test rows are the fold's assignments."""
    if plan.n != dataset.n:
        raise ValueError("fold plan length does not match dataset")
    if not 0 <= fold_id < plan.k:
        raise ValueError(f"fold_id must be in [0, {plan.k})")
    test_mask = plan.assignments == fold_id
    return dataset.take(~test_mask), dataset.take(test_mask)


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: Path
    schema: CsvSchema


def data_root(explicit=None) -> Path:
    """Dataset root: explicit argument, else the env var, else cwd."""
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(DATA_DIR_ENV)
    return Path(env) if env else Path.cwd()


def load_manifest(path) -> dict:
    """Parse a key-value manifest: one section per dataset name."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    entries = {}
    for name in parser.sections():
        section = parser[name]
        categorical = tuple(
            c.strip() for c in section.get("categorical", "").split(",") if c.strip()
        )
        schema = CsvSchema(
            label=section["label"],
            protected=section["protected"],
            favorable=int(section["favorable"]),
            task=section.get("task", "clf"),
            categorical=categorical,
        )
        csv_path = Path(section["path"])
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        entries[name] = ManifestEntry(name=name, path=csv_path, schema=schema)
    return entries


def load_named_dataset(name, manifest_path=None, data_dir=None) -> Dataset:
    if manifest_path is None:
        manifest_path = data_root(data_dir) / MANIFEST_NAME
    entries = load_manifest(manifest_path)
    if name not in entries:
        known = ", ".join(sorted(entries)) or "(none)"
        raise KeyError(f"dataset {name!r} not in manifest (known: {known})")
    entry = entries[name]
    return load_csv(entry.path, entry.schema)
