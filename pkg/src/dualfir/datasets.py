"""Synthetic benchmark generators, CSV ingestion, standardization and folds."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

TASKS = ("regression", "binary", "multiclass")

# default sizes for the built-in synthetic experiments
SYNTH_TRAIN_N = 512
SYNTH_TEST_N = 1024

_SHELL_MAX_TRIES = 10**6


@dataclass
class Dataset:
    features: np.ndarray  # (n, d)
    targets: np.ndarray  # (n,) floats or int labels
    task: str
    feature_names: list = field(default_factory=list)
    n_classes: int = 0
    label_names: list = field(default_factory=list)  # original labels, index = encoded class

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise DataError("features must be a non-empty 2-D array")
        if not np.isfinite(self.features).all():
            raise DataError("non-finite feature values")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.d)]
        if self.task == "regression":
            self.targets = np.asarray(self.targets, dtype=float)
        else:
            self.targets = np.asarray(self.targets, dtype=int)
            if self.n_classes == 0:
                self.n_classes = int(self.targets.max()) + 1
            if self.targets.min() < 0 or self.targets.max() >= self.n_classes:
                raise DataError("labels out of range")
        if self.targets.shape[0] != self.n:
            raise DataError("feature/target row counts differ")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, rows):
        return Dataset(
            self.features[rows],
            self.targets[rows],
            self.task,
            list(self.feature_names),
            self.n_classes,
            list(self.label_names),
        )


# class index = 2*bit(v0*v2) + bit(v1*v2) with bit(x) = (x+1)/2; representatives
# are the cube corners with v2 = +1
_XOR_CORNERS = {
    2 * ((v0 * 1 + 1) // 2) + ((v1 * 1 + 1) // 2): np.array([v0, v1, 1.0])
    for v0 in (-1, 1)
    for v1 in (-1, 1)
}


def gen_xor4(n, rng) -> Dataset:
    """4-way XOR-style classification: 3 informative + 7 noise features (d=10)."""
    if n < 4:
        raise DataError("need n >= 4")
    labels = rng.integers(0, 4, size=n)
    centers = np.stack([_XOR_CORNERS[int(c)] for c in labels])
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)[:, None]
    informative = signs * centers + rng.normal(0.0, np.sqrt(0.5), size=(n, 3))
    noise = rng.normal(size=(n, 7))
    x = np.concatenate([informative, noise], axis=1)
    return Dataset(x, labels, "multiclass", n_classes=4,
                   label_names=["0", "1", "2", "3"])


def gen_nonlinear_regression(n, rng) -> Dataset:
    """y = -2 sin(2 x0) + max(x1, 0) + x2 + exp(-x3) + noise; d=10."""
    if n < 1:
        raise DataError("need n >= 1")
    x = rng.normal(size=(n, 10))
    y = (
        -2.0 * np.sin(2.0 * x[:, 0])
        + np.maximum(x[:, 1], 0.0)
        + x[:, 2]
        + np.exp(-x[:, 3])
        + rng.normal(size=n)
    )
    return Dataset(x, y, "regression")


def _shell_rows(n, rng):
    """Standard normal 4-vectors conditioned on 9 <= |v|^2 <= 16, one per row."""
    rows = np.empty((n, 4))
    got = 0
    tries = 0
    while got < n:
        block = rng.normal(size=(max(64, n - got) * 16, 4))
        sq = np.sum(block**2, axis=1)
        ok = block[(sq >= 9.0) & (sq <= 16.0)]
        take = min(len(ok), n - got)
        rows[got : got + take] = ok[:take]
        got += take
        tries += block.shape[0]
        if tries > _SHELL_MAX_TRIES * n:
            raise DataError("shell rejection sampling exhausted")
    return rows


def gen_binary_hypersphere(n, rng) -> Dataset:
    """Binary task: positives live on a spherical shell in the first 4 features; d=10."""
    if n < 2:
        raise DataError("need n >= 2")
    n_pos = n // 2
    n_neg = n - n_pos
    neg = rng.normal(size=(n_neg, 10))
    pos = np.concatenate([_shell_rows(n_pos, rng), rng.normal(size=(n_pos, 6))], axis=1)
    x = np.concatenate([neg, pos], axis=0)
    y = np.concatenate([np.zeros(n_neg, dtype=int), np.ones(n_pos, dtype=int)])
    order = rng.permutation(n)
    return Dataset(x[order], y[order], "binary", n_classes=2, label_names=["-1", "+1"])


def load_csv(path, target_column, task) -> Dataset:
    """Load a headered CSV; the named column is the target, everything else features."""
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not in {path}")
        t_col = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != t_col]
        features, raw_targets = [], []
        for row_idx, row in enumerate(reader):
            if len(row) != len(header):
                raise DataError(f"row {row_idx + 1}: expected {len(header)} cells, got {len(row)}")
            vals = []
            for col_idx, cell in enumerate(row):
                if col_idx == t_col:
                    raw_targets.append(cell)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"non-numeric cell at row {row_idx + 1}, column {header[col_idx]!r}"
                    ) from None
            features.append(vals)
    if not features:
        raise DataError(f"{path} has no data rows")
    features = np.asarray(features, dtype=float)
    if task == "regression":
        try:
            targets = np.array([float(t) for t in raw_targets])
        except ValueError:
            raise DataError(f"non-numeric target in column {target_column!r}") from None
        return Dataset(features, targets, task, feature_names)
    # labels encoded by first appearance
    seen: dict = {}
    labels = []
    for t in raw_targets:
        if t not in seen:
            seen[t] = len(seen)
        labels.append(seen[t])
    return Dataset(features, np.array(labels, dtype=int), task, feature_names,
                   n_classes=len(seen), label_names=list(seen))


def standardize(train: Dataset, others=()):
    """Zero-mean unit-std per feature, statistics from the training set only.

    Constant columns are left centered at zero with std recorded as 1.
    Returns (standardized train, list of standardized others, mean, std).
    """
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)

    def apply(ds: Dataset):
        return Dataset((ds.features - mean) / std, ds.targets, ds.task,
                       list(ds.feature_names), ds.n_classes, list(ds.label_names))

    return apply(train), [apply(o) for o in others], mean, std


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray  # fold index per row
    seed: int

    def train_rows(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def test_rows(self, fold):
        return np.flatnonzero(self.assignments == fold)


def kfold(n, k, labels=None, seed=0) -> FoldPlan:
    """Seed-deterministic fold assignment; stratified when labels are given."""
    if k > n:
        raise ConfigError(f"k={k} exceeds n={n}")
    if k < 2:
        raise ConfigError("need k >= 2")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=int)
    if labels is None:
        order = rng.permutation(n)
        assignments[order] = np.arange(n) % k
    else:
        labels = np.asarray(labels)
        offset = 0
        for cls in np.unique(labels):
            rows = np.flatnonzero(labels == cls)
            rows = rng.permutation(rows)
            # rotate the starting fold per class so fold sizes stay balanced
            assignments[rows] = (np.arange(len(rows)) + offset) % k
            offset += len(rows)
    return FoldPlan(k, assignments, seed)


def train_val_split(data: Dataset, val_fraction, rng):
    """Hold out a validation slice; stratified for classification tasks."""
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError("val_fraction must be in (0, 1)")
    n = data.n
    labels = None if data.task == "regression" else data.targets
    if labels is None:
        order = rng.permutation(n)
        n_val = max(1, int(round(n * val_fraction)))
        val_rows, train_rows = order[:n_val], order[n_val:]
    else:
        val_parts, train_parts = [], []
        for cls in np.unique(labels):
            rows = rng.permutation(np.flatnonzero(labels == cls))
            n_val = max(1, int(round(len(rows) * val_fraction)))
            val_parts.append(rows[:n_val])
            train_parts.append(rows[n_val:])
        val_rows = np.concatenate(val_parts)
        train_rows = np.concatenate(train_parts)
    if len(train_rows) == 0:
        raise ConfigError("validation split leaves no training rows")
    return data.subset(np.sort(train_rows)), data.subset(np.sort(val_rows))
