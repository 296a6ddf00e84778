"""Sparse Bayesian multi-class kernel classification with sign-constrained weights.

Two trainers share one model format: ``train_mpcvm1`` (top-down EM to the MAP
estimate) and ``train_mpcvm2`` (bottom-up marginal-likelihood maximization).
"""

from .dataset import (DataError, Dataset, SplitSpec, StandardizationParams, apply_standardizer,
                      fit_standardizer, gen_overclass, gen_overlap, load_csv, split)
from .em import EmConfig, train_mpcvm1
from .fmlm import FmlmConfig, train_mpcvm2
from .kernel import KernelConfig, cross, gram, theta_grid
from .metrics import evaluate, friedman_q, generalized_auc
from .model import ModelArtifact, load, predict_class, predict_proba, save
from .probit import class_probabilities, expected_z

__all__ = [
    "DataError", "Dataset", "SplitSpec", "StandardizationParams", "apply_standardizer",
    "fit_standardizer", "gen_overclass", "gen_overlap", "load_csv", "split",
    "EmConfig", "train_mpcvm1", "FmlmConfig", "train_mpcvm2",
    "KernelConfig", "cross", "gram", "theta_grid",
    "evaluate", "friedman_q", "generalized_auc",
    "ModelArtifact", "load", "predict_class", "predict_proba", "save",
    "class_probabilities", "expected_z",
]
