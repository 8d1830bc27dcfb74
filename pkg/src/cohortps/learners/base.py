"""Learner specifications, the fitted-model contract, and shared validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..cohort import Cohort
from ..weights import WeightVector


class LearnerKind(enum.Enum):
    LOGISTIC = "logistic"
    LASSO = "lasso"
    TREE = "tree"
    FOREST = "forest"
    NEURAL_NET = "neural_net"


_DEFAULT_HYPERPARAMETERS: dict[LearnerKind, dict] = {
    LearnerKind.LOGISTIC: {"max_iter": 100, "tol": 1e-8, "ridge": 1e-8},
    LearnerKind.LASSO: {
        "n_lambda": 100,
        "lambda_min_ratio": 1e-3,
        "cv_folds": 10,
    },
    LearnerKind.TREE: {"cp": 0.01, "min_node_weight": 20.0, "max_depth": 30},
    LearnerKind.FOREST: {
        "n_trees": 250,
        "min_node_size": 5.0,
        "mtry": None,  # None -> floor(sqrt(p))
        "max_depth": 0,  # 0 -> unlimited
    },
    LearnerKind.NEURAL_NET: {
        "hidden_size": 2,
        "weight_decay": 1e-4,
        "max_iter": 500,
        "grad_tol": 1e-6,
        "init_range": 0.5,
    },
}


class DegenerateExposureError(ValueError):
    """All exposure values identical: nothing to fit."""


class ConvergenceError(RuntimeError):
    """A solver hit its iteration cap; carries the last iterate when available."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class LearnerSpec:
    """Which learner to fit, with hyperparameters and an explicit seed.

    Hyperparameters are validated against the per-kind defaults at
    construction; unknown keys are rejected. Every stochastic choice a
    learner makes (forest bootstraps, net initialization, internal CV
    folds) derives from ``seed`` — there is no global RNG anywhere.
    """

    kind: LearnerKind
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0
    name: str | None = None

    def __post_init__(self) -> None:
        defaults = _DEFAULT_HYPERPARAMETERS[self.kind]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise ValueError(
                f"unknown hyperparameters for {self.kind.value}: {sorted(unknown)}"
            )
        merged = {**defaults, **self.hyperparameters}
        self._validate(merged)
        object.__setattr__(self, "hyperparameters", merged)
        if self.name is None:
            object.__setattr__(self, "name", self._default_name(merged))

    def _validate(self, hp: dict) -> None:
        kind = self.kind
        if kind is LearnerKind.FOREST:
            if hp["n_trees"] < 1:
                raise ValueError(f"n_trees must be >= 1, got {hp['n_trees']}")
            if hp["min_node_size"] <= 0:
                raise ValueError("min_node_size must be positive")
            if hp["mtry"] is not None and hp["mtry"] < 1:
                raise ValueError("mtry must be >= 1 when given")
        elif kind is LearnerKind.NEURAL_NET:
            if hp["hidden_size"] < 1:
                raise ValueError(f"hidden_size must be >= 1, got {hp['hidden_size']}")
            if hp["weight_decay"] < 0:
                raise ValueError("weight_decay must be non-negative")
        elif kind is LearnerKind.TREE:
            if hp["cp"] < 0:
                raise ValueError("cp must be non-negative")
            if hp["min_node_weight"] <= 0:
                raise ValueError("min_node_weight must be positive")
            if hp["max_depth"] < 1:
                raise ValueError("max_depth must be >= 1")
        elif kind is LearnerKind.LASSO:
            if hp["n_lambda"] < 2:
                raise ValueError("n_lambda must be >= 2")
            if not (0.0 < hp["lambda_min_ratio"] < 1.0):
                raise ValueError("lambda_min_ratio must lie in (0, 1)")
            if hp["cv_folds"] < 2:
                raise ValueError("cv_folds must be >= 2")
        elif kind is LearnerKind.LOGISTIC:
            if hp["max_iter"] < 1:
                raise ValueError("max_iter must be >= 1")

    def _default_name(self, hp: dict) -> str:
        if self.kind is LearnerKind.NEURAL_NET:
            return f"neural_net_{hp['hidden_size']}"
        return self.kind.value

    def with_seed(self, seed: int) -> "LearnerSpec":
        return LearnerSpec(
            kind=self.kind,
            hyperparameters=dict(self.hyperparameters),
            seed=int(seed),
            name=self.name,
        )


@dataclass(frozen=True)
class FitInfo:
    """Training metadata every fitted model carries."""

    n_rows: int
    n_covariates: int
    weights_normalized: bool
    w_source: float | None = None
    controls_per_case: float | None = None
    warnings: tuple = ()


class PropensityModel:
    """A fitted learner exposing predict(X) -> probabilities in [0, 1]."""

    def __init__(self, spec: LearnerSpec, info: FitInfo):
        self.spec = spec
        self.info = info

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = self._check_matrix(X)
        probs = self._predict(X)
        return np.clip(probs, 0.0, 1.0)

    def _check_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.info.n_covariates:
            raise ValueError(
                f"model was trained on {self.info.n_covariates} covariates, "
                f"got {X.shape[1]}"
            )
        return X

    def _predict(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


def validate_training_inputs(cohort: Cohort, weights: WeightVector):
    """Common checks for every fit function; returns (X, y, w) as float arrays."""
    if len(weights) != cohort.n_rows:
        raise ValueError(
            f"weight vector length {len(weights)} does not match cohort size {cohort.n_rows}"
        )
    y = cohort.exposure.astype(float)
    if np.all(y == y[0]):
        raise DegenerateExposureError("all exposure values are identical")
    return np.asarray(cohort.covariates, dtype=float), y, np.asarray(weights.values, dtype=float)


def fit_info_from(cohort: Cohort, weights: WeightVector, warnings: tuple = ()) -> FitInfo:
    return FitInfo(
        n_rows=cohort.n_rows,
        n_covariates=cohort.n_covariates,
        weights_normalized=weights.normalized,
        w_source=weights.w_source,
        controls_per_case=weights.controls_per_case,
        warnings=tuple(warnings),
    )
