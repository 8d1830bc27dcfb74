"""Random forest with weight-proportional bootstrap resampling.

Observation weights enter through the bootstrap (rows are drawn with
probability proportional to their weights); within each tree the growth is
plain unweighted Gini on the bootstrap sample, so the per-tree code is the
same kernel the standalone weighted tree uses.
"""

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
from ._tree_kernel import grow_forest_aggregated, grow_tree, predict_forest, predict_tree


class ForestModel(PropensityModel):
    """Packed node arrays for all trees; tree t spans offsets[t]:offsets[t+1]."""

    def __init__(self, spec, info, feature, threshold, left, right, value, offsets):
        super().__init__(spec, info)
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value
        self.offsets = offsets

    @property
    def n_trees(self) -> int:
        return self.offsets.size - 1

    def tree_predictions(self, X: np.ndarray) -> np.ndarray:
        """(n_trees, n_rows) matrix of per-tree leaf probabilities."""
        X = self._check_matrix(X)
        X = np.ascontiguousarray(X)
        preds = np.empty((self.n_trees, X.shape[0]))
        for t in range(self.n_trees):
            a, b = self.offsets[t], self.offsets[t + 1]
            predict_tree(
                self.feature[a:b], self.threshold[a:b],
                self.left[a:b], self.right[a:b], self.value[a:b],
                X, preds[t],
            )
        return preds

    def _predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        return predict_forest(
            self.feature, self.threshold, self.left, self.right, self.value,
            self.offsets, np.ascontiguousarray(X), out,
        )


def fit_weighted_forest(
    cohort: Cohort, weights: WeightVector, spec: LearnerSpec | None = None
) -> ForestModel:
    """Fit ``n_trees`` trees on weight-proportional bootstraps of size N.

    Each tree considers ``mtry`` (default floor(sqrt(p))) random candidate
    covariates per split, keeps nodes of at least ``min_node_size`` bootstrap
    rows, applies no cp pruning, and predicts its leaf class proportion; the
    forest prediction is the plain mean over trees. Fully deterministic
    given the spec seed.
    """
    if spec is None:
        spec = LearnerSpec(kind=LearnerKind.FOREST)
    if spec.kind is not LearnerKind.FOREST:
        raise ValueError(f"expected a forest spec, got {spec.kind}")
    X, y, w = validate_training_inputs(cohort, weights)
    n, p = X.shape
    hp = spec.hyperparameters
    n_trees = int(hp["n_trees"])
    mtry = hp["mtry"] if hp["mtry"] is not None else max(1, int(np.sqrt(p)))
    mtry = min(int(mtry), p)
    min_node = float(hp["min_node_size"])
    max_depth = int(hp["max_depth"]) if hp["max_depth"] else n

    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(spec.seed)])))
    boot_prob = w / np.sum(w)
    tree_seeds = np.random.SeedSequence([int(spec.seed), 0x7261]).generate_state(
        n_trees, np.uint64
    )

    # Low-cardinality data: a bootstrap collapses to multinomial counts over
    # the distinct (covariates, class) cells, and a tree grown on the cells
    # with count weights is the tree grown on the resampled rows.
    stacked = np.column_stack([X, y])
    cells, inverse = np.unique(stacked, axis=0, return_inverse=True)
    if cells.shape[0] * 2 <= n:
        cell_X = np.ascontiguousarray(cells[:, :-1])
        cell_y = cells[:, -1].copy()
        cell_prob = np.bincount(inverse, weights=boot_prob)
        counts_all = gen.multinomial(n, cell_prob, size=n_trees)
        feature, threshold, left, right, value, offsets = grow_forest_aggregated(
            cell_X,
            cell_y,
            counts_all.astype(np.float64),
            mtry,
            min_node,
            max_depth,
            tree_seeds,
        )
        return ForestModel(
            spec, fit_info_from(cohort, weights),
            feature, threshold, left, right, value, offsets,
        )

    X = np.ascontiguousarray(X)
    ones = np.ones(n)
    parts = []
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    for t in range(n_trees):
        boot = gen.choice(n, size=n, replace=True, p=boot_prob)
        arrays = grow_tree(
            np.ascontiguousarray(X[boot]),
            y[boot],
            ones,
            mtry=mtry,
            min_node_weight=min_node,
            cp=0.0,
            max_depth=max_depth,
            seed=np.uint64(tree_seeds[t] if tree_seeds[t] else 1),
        )
        parts.append(arrays)
        offsets[t + 1] = offsets[t] + arrays[0].size

    feature = np.concatenate([a[0] for a in parts])
    threshold = np.concatenate([a[1] for a in parts])
    left = np.concatenate([a[2] for a in parts])
    right = np.concatenate([a[3] for a in parts])
    value = np.concatenate([a[4] for a in parts])
    return ForestModel(
        spec, fit_info_from(cohort, weights), feature, threshold, left, right, value, offsets
    )
