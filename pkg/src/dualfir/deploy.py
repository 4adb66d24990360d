"""Post-training extraction of the optimal mask, feature scores and predictions."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .masks import Mask, generate_optimal_mask
from .operator_net import OperatorModel, masked_batch
from .selector_net import SelectorModel
from . import nn

REPORT_VERSION = 1


@dataclass
class FirReport:
    m_star: Mask
    raw_scores: np.ndarray  # importance per feature, evaluated at m_star
    normalized_scores: np.ndarray  # raw / max|raw|, in [-1, 1]
    ranking: list  # selected feature indices, descending score
    fold_id: int = 0
    feature_names: list = field(default_factory=list)

    def to_dict(self):
        return {
            "format_version": REPORT_VERSION,
            "fold_id": self.fold_id,
            "mask": self.m_star.to_bitstring(),
            "raw_scores": [float(v) for v in self.raw_scores],
            "normalized_scores": [float(v) for v in self.normalized_scores],
            "ranking": [int(i) for i in self.ranking],
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != REPORT_VERSION:
            raise ConfigError(f"unsupported report version {doc.get('format_version')!r}")
        return cls(
            Mask.from_bitstring(doc["mask"]),
            np.array(doc["raw_scores"], dtype=float),
            np.array(doc["normalized_scores"], dtype=float),
            list(doc["ranking"]),
            doc["fold_id"],
            list(doc.get("feature_names", [])),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def write_scores_csv(self, path):
        """Two-column plot-ready table, one row per feature."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature_index", "normalized_score"])
            for i, v in enumerate(self.normalized_scores):
                writer.writerow([i, repr(float(v))])


def extract(selector: SelectorModel, s, fold_id=0, feature_names=None) -> FirReport:
    """Run the optimal-mask search on a trained selector and score its features.

    Scores for unselected features are reported too; the ranking covers only
    the selected subset, descending score with index tie-break.
    """
    d = selector.d
    m_star, raw = generate_optimal_mask(selector.net, d, s)
    peak = np.max(np.abs(raw))
    normalized = raw / peak if peak > 0 else np.zeros_like(raw)
    sel = m_star.indices
    order = np.argsort(-raw[sel], kind="stable")
    ranking = [int(i) for i in sel[order]]
    return FirReport(m_star, raw, normalized, ranking, fold_id,
                     list(feature_names) if feature_names else [])


def predict_masked(operator: OperatorModel, x_test, m_star: Mask):
    """Operator predictions on test rows restricted to the optimal mask.

    Regression returns a value per row; classification returns
    (class probabilities per row, argmax labels).
    """
    x_test = np.asarray(x_test, dtype=float)
    if x_test.ndim != 2 or x_test.shape[1] != m_star.d:
        raise ConfigError(f"test width {x_test.shape} != d {m_star.d}")
    outputs, _ = nn.forward(operator.net, masked_batch(x_test, m_star))
    if operator.loss_kind == "mse":
        return outputs[:, 0]
    if operator.loss_kind == "binary_cross_entropy":
        p1 = outputs[:, 0]
        probs = np.stack([1.0 - p1, p1], axis=1)
    else:
        probs = outputs
    return probs, np.argmax(probs, axis=1)
