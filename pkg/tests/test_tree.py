import numpy as np
import pytest

from cohortps import WeightVector, fit_weighted_tree, uniform_weights
from cohortps.learners import LearnerKind, LearnerSpec
from tests.conftest import cohort_from_arrays


def _spec(**hp):
    return LearnerSpec(kind=LearnerKind.TREE, hyperparameters=hp)


def reference_tree_predictions(X, y, w, X_query, cp=0.01, min_w=20.0, max_depth=30):
    """Tiny recursive reference CART, written independently of the kernel."""
    w_root = w.sum()
    q_root = (w * y).sum() / w_root
    g_root = 2 * q_root * (1 - q_root)
    min_gain = max(cp * w_root * g_root, 1e-12 * w_root)

    def grow(rows, depth):
        wn = w[rows].sum()
        qn = (w[rows] * y[rows]).sum() / wn
        node = {"value": qn}
        if depth >= max_depth or wn < 2 * min_w or qn in (0.0, 1.0):
            return node
        gn = 2 * qn * (1 - qn)
        best = (-1.0, None, None)
        for f in range(X.shape[1]):
            vals = np.unique(X[rows, f])
            for a, b in zip(vals[:-1], vals[1:]):
                thr = (a + b) / 2
                left = rows[X[rows, f] <= thr]
                right = rows[X[rows, f] > thr]
                wl, wr = w[left].sum(), w[right].sum()
                if wl < min_w or wr < min_w:
                    continue
                ql = (w[left] * y[left]).sum() / wl
                qr = (w[right] * y[right]).sum() / wr
                gain = wn * gn - wl * 2 * ql * (1 - ql) - wr * 2 * qr * (1 - qr)
                if gain > best[0]:
                    best = (gain, f, thr)
        gain, f, thr = best
        if f is None or gain < min_gain:
            return node
        node["feature"] = f
        node["threshold"] = thr
        node["left"] = grow(rows[X[rows, f] <= thr], depth + 1)
        node["right"] = grow(rows[X[rows, f] > thr], depth + 1)
        return node

    root = grow(np.arange(len(y)), 0)

    def walk(x, node):
        while "feature" in node:
            node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
        return node["value"]

    return np.array([walk(x, root) for x in X_query])


class TestFitWeightedTree:
    def test_perfect_separator_single_split(self):
        X = np.repeat([[0.0], [1.0]], 30, axis=0)
        e = np.repeat([0, 1], 30)
        cohort = cohort_from_arrays(X, e)
        model = fit_weighted_tree(cohort, uniform_weights(cohort))
        assert model.n_nodes == 3 and model.n_leaves == 2
        p = model.predict(np.array([[0.0], [1.0]]))
        assert p[0] == 0.0 and p[1] == 1.0  # pure leaves, pre-clipping

    def test_root_only_when_no_split_possible(self):
        X = np.ones((50, 2))
        e = np.array([0, 1] * 25)
        cohort = cohort_from_arrays(X, e)
        model = fit_weighted_tree(cohort, uniform_weights(cohort))
        assert model.n_nodes == 1
        assert model.predict(np.ones((1, 2)))[0] == pytest.approx(0.5)

    def test_root_only_when_cp_blocks(self, small_cohort):
        model = fit_weighted_tree(
            small_cohort, uniform_weights(small_cohort), _spec(cp=0.999)
        )
        assert model.n_nodes == 1
        wmean = float(np.mean(small_cohort.exposure))
        assert model.predict(small_cohort.covariates)[0] == pytest.approx(wmean)

    def test_leaf_values_are_weighted_proportions(self, small_cohort):
        w = WeightVector.from_values(
            np.random.default_rng(0).uniform(0.5, 2.0, small_cohort.n_rows)
        )
        model = fit_weighted_tree(small_cohort, w)
        preds = model.predict(small_cohort.covariates)
        for leaf_value in np.unique(preds):
            rows = preds == leaf_value
            expected = float(
                np.sum(w.values[rows] * small_cohort.exposure[rows]) / np.sum(w.values[rows])
            )
            assert leaf_value == pytest.approx(expected, rel=1e-10)

    def test_matches_reference_implementation(self, small_cohort):
        rng = np.random.default_rng(5)
        w = rng.uniform(0.5, 3.0, small_cohort.n_rows)
        cohort = small_cohort
        model = fit_weighted_tree(cohort, WeightVector.from_values(w))
        X = cohort.covariates
        y = cohort.exposure.astype(float)
        grid = rng.integers(0, 2, size=(64, 6)).astype(float)
        expected = reference_tree_predictions(X, y, w, grid)
        np.testing.assert_allclose(model.predict(grid), expected, atol=1e-10)

    def test_duplication_equivalence(self):
        rng = np.random.default_rng(17)
        X = rng.integers(0, 2, size=(40, 3)).astype(float)
        e = (rng.random(40) < 0.5).astype(int)
        e[:2] = [0, 1]
        k = rng.integers(1, 5, size=40)
        cohort = cohort_from_arrays(X, e)
        weighted = fit_weighted_tree(cohort, WeightVector.from_values(k.astype(float)))
        rows = np.repeat(np.arange(40), k)
        dup = cohort_from_arrays(X[rows], e[rows])
        dup_fit = fit_weighted_tree(dup, uniform_weights(dup))
        grid = rng.integers(0, 2, size=(32, 3)).astype(float)
        np.testing.assert_allclose(weighted.predict(grid), dup_fit.predict(grid), atol=1e-6)

    def test_minimum_weight_precondition(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        cohort = cohort_from_arrays(X, np.array([0, 1] * 5))
        with pytest.raises(ValueError, match="min_node_weight"):
            fit_weighted_tree(cohort, uniform_weights(cohort))

    def test_continuous_covariates_supported(self):
        rng = np.random.default_rng(23)
        X = rng.normal(size=(120, 2))
        e = (X[:, 0] + 0.5 * rng.normal(size=120) > 0).astype(int)
        cohort = cohort_from_arrays(X, e)
        model = fit_weighted_tree(cohort, uniform_weights(cohort))
        p = model.predict(X)
        assert model.n_nodes > 1
        assert np.all((p >= 0) & (p <= 1))
