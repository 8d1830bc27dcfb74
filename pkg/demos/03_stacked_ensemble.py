"""The full weighted super learner: cross-validated predictions, simplex
meta-weights, full refit, and external cross-validation of the whole
procedure for an honest out-of-fold loss."""

import numpy as np

from cohortps import (
    LossFunction,
    RngStream,
    compute_observation_weights,
    default_library,
    external_cv_super_learner,
    fit_super_learner,
    sample_conditional_cohort,
)

cohort = sample_conditional_cohort(1000, 1.0, RngStream(base_seed=3, stream_index=0))
weights = compute_observation_weights(cohort, w=0.37)
library = default_library(seed=11)
loss = LossFunction()

fit = fit_super_learner(cohort, weights, library, k=10, loss=loss, seed=42)

print("meta-weights (alpha):")
for name, a in zip(fit.learner_names, fit.alpha):
    bar = "#" * int(round(40 * a))
    print(f"  {name:15s} {a:6.3f} {bar}")

print("\nweighted 10-fold CV loss by learner:")
for name, value in sorted(fit.diagnostics["cv_loss_by_learner"].items(), key=lambda kv: kv[1]):
    print(f"  {name:15s} {value:.4f}")
print(f"  {'ensemble':15s} {fit.diagnostics['cv_loss_ensemble']:.4f}")

est = fit.predict(cohort.covariates)
print(f"\nensemble mean |err| vs true propensity: "
      f"{np.mean(np.abs(est - cohort.true_propensity)):.4f}")

ext = external_cv_super_learner(cohort, weights, library, k_outer=10, k_inner=10,
                                loss=loss, seed=42)
honest = loss.mean_loss(ext.oof_predictions, cohort.exposure.astype(float), weights.values)
print(f"externally cross-validated ensemble loss: {honest:.4f}")
print(f"per-fold alpha mass on logistic+lasso: "
      f"{np.round(ext.alphas[:, 2] + ext.alphas[:, 3], 3)}")
