"""Observation-weighted base learners with a predict-probability contract."""

from __future__ import annotations

import numpy as np

from ..cohort import Cohort
from ..weights import WeightVector
from .base import (
    ConvergenceError,
    DegenerateExposureError,
    FitInfo,
    LearnerKind,
    LearnerSpec,
    PropensityModel,
)
from .forest import ForestModel, fit_weighted_forest
from .lasso import LassoModel, fit_weighted_lasso
from .logistic import LogisticModel, fit_weighted_logistic
from .nnet import NeuralNetModel, fit_weighted_nnet, initial_parameters, nnet_objective
from .tree import TreeModel, fit_weighted_tree

_FITTERS = {
    LearnerKind.LOGISTIC: fit_weighted_logistic,
    LearnerKind.LASSO: fit_weighted_lasso,
    LearnerKind.TREE: fit_weighted_tree,
    LearnerKind.FOREST: fit_weighted_forest,
    LearnerKind.NEURAL_NET: fit_weighted_nnet,
}


def fit_learner(spec: LearnerSpec, cohort: Cohort, weights: WeightVector) -> PropensityModel:
    """Fit any learner from its spec."""
    return _FITTERS[spec.kind](cohort, weights, spec)


def derive_seed(*parts: int) -> int:
    """Deterministic child seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(q) for q in parts]).generate_state(1)[0])


def default_library(seed: int = 0, forest_trees: int = 250) -> list[LearnerSpec]:
    """The seven-learner ensemble library: forest (default 250 trees),
    classification tree, logistic regression, lasso, and neural nets with
    hidden sizes 2, 3, and 5. Per-learner seeds derive from ``seed``."""
    entries = [
        (LearnerKind.FOREST, {"n_trees": forest_trees}),
        (LearnerKind.TREE, {}),
        (LearnerKind.LOGISTIC, {}),
        (LearnerKind.LASSO, {}),
        (LearnerKind.NEURAL_NET, {"hidden_size": 2}),
        (LearnerKind.NEURAL_NET, {"hidden_size": 3}),
        (LearnerKind.NEURAL_NET, {"hidden_size": 5}),
    ]
    return [
        LearnerSpec(kind=kind, hyperparameters=hp, seed=derive_seed(seed, i))
        for i, (kind, hp) in enumerate(entries)
    ]


def reduced_library(seed: int = 0) -> list[LearnerSpec]:
    """The fast deterministic subset: logistic, lasso, classification tree."""
    entries = [
        (LearnerKind.LOGISTIC, {}),
        (LearnerKind.LASSO, {}),
        (LearnerKind.TREE, {}),
    ]
    return [
        LearnerSpec(kind=kind, hyperparameters=hp, seed=derive_seed(seed, i))
        for i, (kind, hp) in enumerate(entries)
    ]


__all__ = [
    "ConvergenceError",
    "DegenerateExposureError",
    "FitInfo",
    "ForestModel",
    "LassoModel",
    "LearnerKind",
    "LearnerSpec",
    "LogisticModel",
    "NeuralNetModel",
    "PropensityModel",
    "TreeModel",
    "default_library",
    "derive_seed",
    "fit_learner",
    "fit_weighted_forest",
    "fit_weighted_lasso",
    "fit_weighted_logistic",
    "fit_weighted_nnet",
    "fit_weighted_tree",
    "initial_parameters",
    "nnet_objective",
    "reduced_library",
]
