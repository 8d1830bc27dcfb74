import numpy as np
import pytest

from cohortps import (
    DgpSpec,
    RngStream,
    WeightVector,
    fit_weighted_logistic,
    sample_random_cohort,
    uniform_weights,
)
from cohortps.learners import ConvergenceError, DegenerateExposureError, LearnerKind, LearnerSpec
from tests.conftest import cohort_from_arrays


def reference_newton_logistic(X, y, w, iters=200):
    """Independent unweighted-capable Newton solver used as an oracle."""
    Xd = np.column_stack([np.ones(len(y)), X])
    beta = np.zeros(Xd.shape[1])
    for _ in range(iters):
        mu = 1 / (1 + np.exp(-(Xd @ beta)))
        H = Xd.T @ (w[:, None] * (mu * (1 - mu))[:, None] * Xd)
        g = Xd.T @ (w * (y - mu))
        step = np.linalg.solve(H, g)
        beta = beta + step
        if np.max(np.abs(step)) < 1e-12:
            break
    return beta


class TestFitWeightedLogistic:
    def test_dgp_consistency_100_replications(self, random_cohort_3000):
        # mean of each coefficient across 100 random-sample fits lies within
        # 3 Monte Carlo standard errors of the generating value
        truth = np.array(DgpSpec().coefficients)
        coefs = []
        intercepts = []
        for rep in range(100):
            cohort = sample_random_cohort(3000, RngStream(606, rep))
            model = fit_weighted_logistic(cohort, uniform_weights(cohort))
            coefs.append(model.coef)
            intercepts.append(model.intercept)
        coefs = np.array(coefs)
        mc_se = coefs.std(axis=0, ddof=1) / np.sqrt(100)
        assert np.all(np.abs(coefs.mean(axis=0) - truth) < 3 * mc_se)
        int_se = np.std(intercepts, ddof=1) / np.sqrt(100)
        assert abs(np.mean(intercepts)) < 3 * int_se

    def test_monotone_single_covariate(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        e = np.array([0, 0, 1, 1])
        cohort = cohort_from_arrays(X, e)
        model = fit_weighted_logistic(cohort, uniform_weights(cohort))
        p = model.predict(np.array([[0.0], [1.0]]))
        assert p[1] > p[0]
        assert model.ridge_used  # perfect separation trips the ridge guard
        assert "ridge_fallback" in model.info.warnings

    def test_degenerate_exposure_rejected(self):
        cohort = cohort_from_arrays(np.arange(8, dtype=float).reshape(-1, 1), np.ones(8, dtype=int))
        with pytest.raises(DegenerateExposureError):
            fit_weighted_logistic(cohort, uniform_weights(cohort))

    def test_needs_more_rows_than_columns(self):
        X = np.eye(3)
        cohort = cohort_from_arrays(X, np.array([0, 1, 0]))
        with pytest.raises(ValueError, match="N > p\\+1"):
            fit_weighted_logistic(cohort, uniform_weights(cohort))

    def test_matches_reference_solver(self, small_cohort):
        w = uniform_weights(small_cohort)
        model = fit_weighted_logistic(small_cohort, w)
        ref = reference_newton_logistic(
            small_cohort.covariates, small_cohort.exposure.astype(float), w.values
        )
        np.testing.assert_allclose(
            np.concatenate([[model.intercept], model.coef]), ref, atol=1e-8
        )

    def test_duplication_equivalence(self):
        rng = np.random.default_rng(3)
        X = rng.integers(0, 2, size=(25, 3)).astype(float)
        e = (rng.random(25) < 0.4).astype(int)
        e[:3] = [0, 1, 0]
        k = rng.integers(1, 5, size=25)
        cohort = cohort_from_arrays(X, e)
        weighted = fit_weighted_logistic(cohort, WeightVector.from_values(k.astype(float)))
        rows = np.repeat(np.arange(25), k)
        dup = cohort_from_arrays(X[rows], e[rows])
        dup_fit = fit_weighted_logistic(dup, uniform_weights(dup))
        grid = rng.random((40, 3))
        np.testing.assert_allclose(weighted.predict(grid), dup_fit.predict(grid), atol=1e-6)

    def test_weight_scale_invariance(self, small_cohort):
        base = uniform_weights(small_cohort).values
        m1 = fit_weighted_logistic(small_cohort, WeightVector.from_values(base))
        m2 = fit_weighted_logistic(small_cohort, WeightVector.from_values(base * 3.7))
        np.testing.assert_allclose(
            m1.predict(small_cohort.covariates), m2.predict(small_cohort.covariates), atol=1e-8
        )

    def test_convergence_error_carries_iterate(self, small_cohort):
        spec = LearnerSpec(kind=LearnerKind.LOGISTIC, hyperparameters={"max_iter": 1})
        with pytest.raises(ConvergenceError) as err:
            fit_weighted_logistic(small_cohort, uniform_weights(small_cohort), spec)
        assert err.value.last_iterate is not None
        assert err.value.last_iterate.coef.shape == (6,)
