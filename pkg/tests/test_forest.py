import numpy as np
import pytest

from cohortps import WeightVector, fit_weighted_forest, uniform_weights
from cohortps.learners import LearnerKind, LearnerSpec
from cohortps.learners._tree_kernel import grow_tree, predict_tree
from tests.conftest import cohort_from_arrays


def _spec(seed=0, **hp):
    return LearnerSpec(kind=LearnerKind.FOREST, hyperparameters=hp, seed=seed)


class TestFitWeightedForest:
    def test_single_tree_equals_tree_on_its_bootstrap(self, medium_cohort):
        # degenerate ensemble: replay the same multinomial bootstrap and grow
        # one tree directly with the forest's within-tree settings
        w = uniform_weights(medium_cohort)
        spec = _spec(seed=99, n_trees=1)
        forest = fit_weighted_forest(medium_cohort, w, spec)

        X = medium_cohort.covariates.astype(float)
        y = medium_cohort.exposure.astype(float)
        n = X.shape[0]
        stacked = np.column_stack([X, y])
        cells, inverse = np.unique(stacked, axis=0, return_inverse=True)
        assert cells.shape[0] * 2 <= n  # the aggregated-bootstrap path applies
        cell_prob = np.bincount(inverse, weights=np.full(n, 1.0 / n))
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([99])))
        counts = gen.multinomial(n, cell_prob, size=1)[0]
        live = counts > 0
        tree_seed = np.random.SeedSequence([99, 0x7261]).generate_state(1, np.uint64)[0]
        arrays = grow_tree(
            np.ascontiguousarray(cells[live, :-1]),
            cells[live, -1].copy(),
            counts[live].astype(float),
            mtry=2,  # floor(sqrt(6))
            min_node_weight=5.0,
            cp=0.0,
            max_depth=int(np.sum(live)) + 1,
            seed=np.uint64(tree_seed),
        )
        grid = np.random.default_rng(1).integers(0, 2, size=(64, 6)).astype(float)
        expected = predict_tree(*arrays, np.ascontiguousarray(grid), np.empty(64))
        np.testing.assert_array_equal(forest.predict(grid), expected)

    def test_predictions_in_unit_interval(self, small_cohort):
        model = fit_weighted_forest(
            small_cohort, uniform_weights(small_cohort), _spec(seed=4, n_trees=30)
        )
        grid = np.random.default_rng(2).integers(0, 2, size=(100, 6)).astype(float)
        p = model.predict(grid)
        assert np.all((p >= 0.0) & (p <= 1.0))

    def test_same_seed_bit_identical(self, small_cohort):
        w = uniform_weights(small_cohort)
        a = fit_weighted_forest(small_cohort, w, _spec(seed=12, n_trees=25))
        b = fit_weighted_forest(small_cohort, w, _spec(seed=12, n_trees=25))
        grid = np.random.default_rng(3).integers(0, 2, size=(50, 6)).astype(float)
        assert np.array_equal(a.predict(grid), b.predict(grid))
        c = fit_weighted_forest(small_cohort, w, _spec(seed=13, n_trees=25))
        assert not np.array_equal(a.predict(grid), c.predict(grid))

    def test_forest_prediction_is_mean_of_trees(self, small_cohort):
        model = fit_weighted_forest(
            small_cohort, uniform_weights(small_cohort), _spec(seed=5, n_trees=12)
        )
        grid = np.random.default_rng(4).integers(0, 2, size=(20, 6)).astype(float)
        per_tree = model.tree_predictions(grid)
        np.testing.assert_allclose(model.predict(grid), per_tree.mean(axis=0), atol=1e-12)

    def test_weighted_bootstrap_shifts_predictions(self, small_cohort):
        # heavy weight on exposed rows pushes predictions up on average
        exposed_heavy = np.where(small_cohort.exposure == 1, 5.0, 1.0)
        uniform = fit_weighted_forest(
            small_cohort, uniform_weights(small_cohort), _spec(seed=6, n_trees=60)
        )
        tilted = fit_weighted_forest(
            small_cohort, WeightVector.from_values(exposed_heavy), _spec(seed=6, n_trees=60)
        )
        grid = np.random.default_rng(5).integers(0, 2, size=(200, 6)).astype(float)
        assert tilted.predict(grid).mean() > uniform.predict(grid).mean()

    def test_row_bootstrap_path_for_continuous_data(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(90, 2))
        e = (X[:, 0] > 0).astype(int)
        cohort = cohort_from_arrays(X, e)
        a = fit_weighted_forest(cohort, uniform_weights(cohort), _spec(seed=7, n_trees=15))
        b = fit_weighted_forest(cohort, uniform_weights(cohort), _spec(seed=7, n_trees=15))
        p = a.predict(X)
        assert np.all((p >= 0) & (p <= 1))
        assert np.array_equal(p, b.predict(X))
        # signal recovered: exposed rows score higher
        assert p[e == 1].mean() > p[e == 0].mean() + 0.2

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="n_trees"):
            _spec(n_trees=0)
        with pytest.raises(ValueError, match="unknown hyperparameters"):
            LearnerSpec(kind=LearnerKind.FOREST, hyperparameters={"trees": 10})
