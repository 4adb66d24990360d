"""Populationwise feature importance ranking with a dual-net architecture."""

from .datasets import (
    Dataset,
    FoldPlan,
    gen_binary_hypersphere,
    gen_nonlinear_regression,
    gen_xor4,
    kfold,
    load_csv,
    standardize,
)
from .deploy import FirReport, extract, predict_masked
from .errors import ConfigError, DataError, NumericError
from .estimator import DualNetFeatureRanker
from .masks import Mask, generate_optimal_mask, perturb, random_mask, swap_extremes, top_s_from_scores
from .training import TrainConfig, TrainedModel, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "DualNetFeatureRanker",
    "FirReport",
    "FoldPlan",
    "Mask",
    "NumericError",
    "TrainConfig",
    "TrainedModel",
    "extract",
    "gen_binary_hypersphere",
    "gen_nonlinear_regression",
    "gen_xor4",
    "generate_optimal_mask",
    "kfold",
    "load_csv",
    "perturb",
    "predict_masked",
    "random_mask",
    "standardize",
    "swap_extremes",
    "top_s_from_scores",
    "train",
]
