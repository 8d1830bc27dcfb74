"""Weighted classification tree (binary recursive partitioning on Gini)."""

from __future__ import annotations

import numpy as np

from ..cohort import Cohort
from ..weights import WeightVector
from .base import (
    LearnerKind,
    LearnerSpec,
    PropensityModel,
    fit_info_from,
    validate_training_inputs,
)
from ._tree_kernel import grow_tree, predict_tree


class TreeModel(PropensityModel):
    def __init__(self, spec, info, feature, threshold, left, right, value):
        super().__init__(spec, info)
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def _predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        return predict_tree(self.feature, self.threshold, self.left, self.right,
                            self.value, np.ascontiguousarray(X), out)


def fit_weighted_tree(
    cohort: Cohort, weights: WeightVector, spec: LearnerSpec | None = None
) -> TreeModel:
    """Grow a weighted CART tree.

    A split is kept only when its total-scale weighted Gini decrease is at
    least ``cp`` times the root impurity and both children carry at least
    ``min_node_weight`` (in the units of the supplied weights, so the
    default 20 means twenty average-weight observations under normalized
    weights). Leaves predict their weighted exposure proportion; when no
    split clears the gate the tree is a single root predicting the weighted
    mean exposure.
    """
    if spec is None:
        spec = LearnerSpec(kind=LearnerKind.TREE)
    if spec.kind is not LearnerKind.TREE:
        raise ValueError(f"expected a tree spec, got {spec.kind}")
    X, y, w = validate_training_inputs(cohort, weights)
    hp = spec.hyperparameters
    min_w = float(hp["min_node_weight"])
    if float(np.sum(w)) < 2.0 * min_w:
        raise ValueError(
            f"total weight {np.sum(w):.3f} is below 2*min_node_weight={2 * min_w}"
        )
    feature, threshold, left, right, value = grow_tree(
        np.ascontiguousarray(X),
        y,
        w,
        mtry=X.shape[1],
        min_node_weight=min_w,
        cp=float(hp["cp"]),
        max_depth=int(hp["max_depth"]),
        seed=np.uint64(spec.seed if spec.seed else 1),
    )
    return TreeModel(spec, fit_info_from(cohort, weights), feature, threshold, left, right, value)
