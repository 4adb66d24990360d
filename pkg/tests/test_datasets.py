"""Synthetic generators, CSV ingestion, standardization and fold plans.

Generator checks use independent statistical oracles: an ordinary
least-squares fit for the regression formula, exact shell membership for the
hypersphere task, and chi-square bounds for label balance.
"""

import numpy as np
import pytest
from scipy import stats

from dualfir.datasets import (
    Dataset,
    gen_binary_hypersphere,
    gen_nonlinear_regression,
    gen_xor4,
    kfold,
    load_csv,
    standardize,
    train_val_split,
)
from dualfir.errors import ConfigError, DataError


# ---------------------------------------------------------------- generators

def test_xor4_shapes_and_balance(rng):
    ds = gen_xor4(4000, rng)
    assert ds.features.shape == (4000, 10)
    assert ds.task == "multiclass" and ds.n_classes == 4
    counts = np.bincount(ds.targets, minlength=4)
    # labels are iid uniform over 4 classes: chi-square test at alpha=1e-6
    chi2 = float(np.sum((counts - 1000.0) ** 2 / 1000.0))
    assert chi2 < stats.chi2.ppf(1 - 1e-6, df=3)


def test_xor4_class_structure(rng):
    """Class = 2*bit(v0*v2) + bit(v1*v2): within each class the products
    x0*x2 and x1*x2 have the sign the label encodes."""
    ds = gen_xor4(8000, rng)
    x, y = ds.features, ds.targets
    for cls in range(4):
        rows = x[y == cls]
        exp0 = 1.0 if cls // 2 else -1.0  # sign of v0*v2
        exp1 = 1.0 if cls % 2 else -1.0  # sign of v1*v2
        # noise (std ~0.7 around unit-magnitude centers) keeps the product
        # mean positive/negative but well away from +-1
        assert np.sign(np.mean(rows[:, 0] * rows[:, 2])) == exp0
        assert np.sign(np.mean(rows[:, 1] * rows[:, 2])) == exp1
    # noise features carry no class signal
    for j in range(3, 10):
        means = [np.mean(x[y == cls, j]) for cls in range(4)]
        assert np.max(np.abs(means)) < 0.15


def test_xor4_mixture_is_sign_symmetric(rng):
    # each class is an equal mixture around +-v, so informative means are ~0
    ds = gen_xor4(20000, rng)
    for cls in range(4):
        rows = ds.features[ds.targets == cls, :3]
        assert np.max(np.abs(rows.mean(axis=0))) < 0.1


def test_nonlinear_regression_formula_oracle(rng):
    """Regress y on the four known transforms: OLS must recover unit
    coefficients and leave only the unit noise variance unexplained."""
    ds = gen_nonlinear_regression(20000, rng)
    x, y = ds.features, ds.targets
    design = np.column_stack([
        np.sin(2.0 * x[:, 0]),
        np.maximum(x[:, 1], 0.0),
        x[:, 2],
        np.exp(-x[:, 3]),
        np.ones(len(y)),
    ])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    assert np.allclose(coef[:4], [-2.0, 1.0, 1.0, 1.0], atol=0.05)
    assert abs(coef[4]) < 0.05
    resid = y - design @ coef
    assert abs(np.var(resid) - 1.0) < 0.1  # the epsilon ~ N(0,1) term
    # the remaining six features are pure noise
    for j in range(4, 10):
        assert abs(np.corrcoef(x[:, j], resid)[0, 1]) < 0.05


def test_binary_hypersphere_shell_membership(rng):
    ds = gen_binary_hypersphere(2000, rng)
    assert ds.task == "binary" and ds.n_classes == 2
    sq = np.sum(ds.features[:, :4] ** 2, axis=1)
    pos = ds.targets == 1
    assert pos.sum() == 1000
    assert np.all((sq[pos] >= 9.0) & (sq[pos] <= 16.0))
    # a standard normal 4-vector rarely lands in the shell, so negatives
    # should mostly fall outside it
    inside = np.mean((sq[~pos] >= 9.0) & (sq[~pos] <= 16.0))
    assert inside < 0.2


def test_binary_hypersphere_noise_features_standard_normal(rng):
    ds = gen_binary_hypersphere(4000, rng)
    tail = ds.features[:, 4:]
    assert np.max(np.abs(tail.mean(axis=0))) < 0.1
    assert np.max(np.abs(tail.std(axis=0) - 1.0)) < 0.1


def test_generators_are_seed_deterministic():
    for gen in (gen_xor4, gen_nonlinear_regression, gen_binary_hypersphere):
        a = gen(100, np.random.default_rng(5))
        b = gen(100, np.random.default_rng(5))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.targets, b.targets)


# ------------------------------------------------------------------- Dataset

def test_dataset_validation():
    with pytest.raises(ConfigError):
        Dataset(np.zeros((2, 3)), np.zeros(2), "unknown-task")
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 3)), np.zeros(3), "regression")
    with pytest.raises(DataError):
        Dataset(np.array([[np.inf, 0.0]]), np.zeros(1), "regression")
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 3)), np.array([0, 5]), "binary", n_classes=2)


def test_dataset_default_feature_names():
    ds = Dataset(np.zeros((2, 3)), np.zeros(2), "regression")
    assert ds.feature_names == ["x0", "x1", "x2"]


# ----------------------------------------------------------------------- CSV

def _write(path, text):
    path.write_text(text)
    return str(path)


def test_load_csv_regression(tmp_path):
    p = _write(tmp_path / "d.csv", "a,b,y\n1,2,3.5\n4,5,6.5\n")
    ds = load_csv(p, "y", "regression")
    assert ds.feature_names == ["a", "b"]
    assert np.array_equal(ds.features, [[1, 2], [4, 5]])
    assert np.array_equal(ds.targets, [3.5, 6.5])


def test_load_csv_target_not_last_column(tmp_path):
    p = _write(tmp_path / "d.csv", "y,a,b\n1,2,3\n4,5,6\n")
    ds = load_csv(p, "y", "regression")
    assert ds.feature_names == ["a", "b"]
    assert np.array_equal(ds.features, [[2, 3], [5, 6]])


def test_load_csv_labels_first_appearance(tmp_path):
    p = _write(tmp_path / "d.csv", "a,y\n1,cat\n2,dog\n3,cat\n4,bird\n")
    ds = load_csv(p, "y", "multiclass")
    assert ds.label_names == ["cat", "dog", "bird"]
    assert np.array_equal(ds.targets, [0, 1, 0, 2])
    assert ds.n_classes == 3


def test_load_csv_errors(tmp_path):
    with pytest.raises(DataError):
        load_csv(str(tmp_path / "missing.csv"), "y", "regression")
    with pytest.raises(DataError, match="empty"):
        load_csv(_write(tmp_path / "e.csv", ""), "y", "regression")
    with pytest.raises(DataError, match="'z'"):
        load_csv(_write(tmp_path / "t.csv", "a,y\n1,2\n"), "z", "regression")
    with pytest.raises(DataError, match="row 2"):
        load_csv(_write(tmp_path / "w.csv", "a,y\n1,2\n3\n"), "y", "regression")
    with pytest.raises(DataError, match="column 'a'"):
        load_csv(_write(tmp_path / "n.csv", "a,y\n1,2\nx,4\n"), "y", "regression")
    with pytest.raises(DataError, match="no data rows"):
        load_csv(_write(tmp_path / "h.csv", "a,y\n"), "y", "regression")
    with pytest.raises(ConfigError):
        load_csv(_write(tmp_path / "k.csv", "a,y\n1,2\n"), "y", "clustering")


# ------------------------------------------------------------- standardize

def test_standardize_train_statistics_only(rng):
    train = Dataset(rng.normal(5.0, 3.0, size=(200, 4)), rng.normal(size=200), "regression")
    test = Dataset(rng.normal(5.0, 3.0, size=(50, 4)), rng.normal(size=50), "regression")
    strain, (stest,), mean, std = standardize(train, [test])
    assert np.allclose(strain.features.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(strain.features.std(axis=0), 1.0, atol=1e-12)
    # the test set uses the training statistics, not its own
    assert np.allclose(stest.features, (test.features - mean) / std)
    assert not np.allclose(stest.features.mean(axis=0), 0.0, atol=1e-3)


def test_standardize_constant_column(rng):
    x = np.column_stack([np.full(10, 7.0), rng.normal(size=10)])
    ds = Dataset(x, np.zeros(10), "regression")
    out, _, mean, std = standardize(ds)
    assert std[0] == 1.0
    assert np.allclose(out.features[:, 0], 0.0)


# ------------------------------------------------------------------ folds

def test_kfold_partition_properties():
    plan = kfold(103, 5, seed=3)
    sizes = []
    for f in range(5):
        tr, te = plan.train_rows(f), plan.test_rows(f)
        assert len(np.intersect1d(tr, te)) == 0
        assert len(tr) + len(te) == 103
        sizes.append(len(te))
    assert sum(sizes) == 103
    assert max(sizes) - min(sizes) <= 1


def test_kfold_stratified_balance():
    labels = np.array([0] * 60 + [1] * 40)
    plan = kfold(100, 5, labels, seed=1)
    for f in range(5):
        te = plan.test_rows(f)
        assert np.sum(labels[te] == 0) == 12
        assert np.sum(labels[te] == 1) == 8


def test_kfold_deterministic():
    a = kfold(50, 4, seed=9)
    b = kfold(50, 4, seed=9)
    assert np.array_equal(a.assignments, b.assignments)


def test_kfold_validation():
    with pytest.raises(ConfigError):
        kfold(3, 5)
    with pytest.raises(ConfigError):
        kfold(10, 1)


def test_train_val_split_stratified(rng):
    labels = np.array([0] * 80 + [1] * 20)
    ds = Dataset(rng.normal(size=(100, 3)), labels, "binary", n_classes=2)
    train, val = train_val_split(ds, 0.25, rng)
    assert train.n + val.n == 100
    assert np.sum(val.targets == 0) == 20
    assert np.sum(val.targets == 1) == 5


def test_train_val_split_validation(rng):
    ds = Dataset(np.zeros((10, 2)), np.zeros(10), "regression")
    with pytest.raises(ConfigError):
        train_val_split(ds, 0.0, rng)
    with pytest.raises(ConfigError):
        train_val_split(ds, 1.0, rng)
