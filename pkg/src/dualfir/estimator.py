"""Scikit-learn style front end for the dual-net feature ranker."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.multiclass import type_of_target
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datasets import Dataset, standardize
from .deploy import extract, predict_masked
from .errors import ConfigError
from .training import TrainConfig, train


class DualNetFeatureRanker(BaseEstimator):
    """Selects a fixed-size feature subset and ranks its features by importance.

    Trains a supervised operator network on masked inputs jointly with a
    selector network that predicts the operator's loss per mask; the selector's
    input gradient drives a stochastic local search over masks.  After fitting,
    ``support_`` marks the selected features, ``importances_`` holds the
    per-feature scores and ``predict`` applies the operator restricted to the
    selected subset.

    Parameters mirror the training configuration; ``task='auto'`` infers
    regression / binary / multiclass from the targets.
    """

    def __init__(self, s=5, task="auto", operator_hidden=(60, 30, 20),
                 selector_hidden=(100, 50, 10), e1=6000, candidate_count=32,
                 exploit_fraction=0.5, s_p=2, batch_size=32,
                 selector_update_period=8, max_phase2_batches=20000, patience=50,
                 operator_lr=1e-3, selector_lr=1e-3, val_fraction=0.2,
                 full_train_eval=False, standardize=False, random_state=0):
        self.s = s
        self.task = task
        self.operator_hidden = operator_hidden
        self.selector_hidden = selector_hidden
        self.e1 = e1
        self.candidate_count = candidate_count
        self.exploit_fraction = exploit_fraction
        self.s_p = s_p
        self.batch_size = batch_size
        self.selector_update_period = selector_update_period
        self.max_phase2_batches = max_phase2_batches
        self.patience = patience
        self.operator_lr = operator_lr
        self.selector_lr = selector_lr
        self.val_fraction = val_fraction
        self.full_train_eval = full_train_eval
        self.standardize = standardize
        self.random_state = random_state

    def _resolve_task(self, y):
        if self.task != "auto":
            return self.task
        kind = type_of_target(y)
        if kind == "binary":
            return "binary"
        if kind == "multiclass":
            return "multiclass"
        return "regression"

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=False)
        task = self._resolve_task(y)
        if task == "regression":
            y = np.asarray(y, dtype=float)
            classes = None
        else:
            classes, y = np.unique(y, return_inverse=True)
        data = Dataset(X, y, task,
                       n_classes=0 if classes is None else len(classes))
        self.feature_mean_ = np.zeros(data.d)
        self.feature_std_ = np.ones(data.d)
        if self.standardize:
            data, _, self.feature_mean_, self.feature_std_ = standardize(data)
        config = TrainConfig(
            d=data.d, s=self.s, task=task, n_classes=data.n_classes,
            operator_hidden=tuple(self.operator_hidden),
            selector_hidden=tuple(self.selector_hidden),
            e1=self.e1, candidate_count=self.candidate_count,
            exploit_fraction=self.exploit_fraction, s_p=self.s_p,
            batch_size=self.batch_size,
            selector_update_period=self.selector_update_period,
            max_phase2_batches=self.max_phase2_batches, patience=self.patience,
            operator_lr=self.operator_lr, selector_lr=self.selector_lr,
            val_fraction=self.val_fraction, full_train_eval=self.full_train_eval,
            seed=self.random_state,
        )
        model = train(config, data)
        report = extract(model.selector, self.s)
        self.model_ = model
        self.report_ = report
        self.task_ = task
        self.classes_ = classes
        self.n_features_in_ = data.d
        self.mask_ = report.m_star
        self.support_ = report.m_star.bits.copy()
        self.importances_ = report.raw_scores.copy()
        self.normalized_importances_ = report.normalized_scores.copy()
        self.ranking_ = list(report.ranking)
        return self

    def get_support(self, indices=False):
        check_is_fitted(self, "support_")
        return np.flatnonzero(self.support_) if indices else self.support_.copy()

    def transform(self, X):
        """Drop unselected feature columns."""
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X[:, self.support_]

    def _prepare(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.feature_mean_) / self.feature_std_

    def predict(self, X):
        X = self._prepare(X)
        out = predict_masked(self.model_.operator, X, self.mask_)
        if self.task_ == "regression":
            return out
        _, labels = out
        return self.classes_[labels]

    def predict_proba(self, X):
        X = self._prepare(X)
        if self.task_ == "regression":
            raise ConfigError("predict_proba is undefined for regression")
        probs, _ = predict_masked(self.model_.operator, X, self.mask_)
        return probs
