"""Propensity score estimation for cohorts with oversampled exposed subjects.

Exposure-probability observation weights make the source-population
propensity score function identifiable from a conditionally sampled cohort;
this package provides the weights, a library of weighted base learners, the
cross-validated stacked ensemble that combines them, simulated populations
with exact small-space oracles, and a replication harness for bias / MSE /
relative-efficiency studies.
"""

__version__ = "0.1.0"

from .cohort import Cohort, ConditionalOnExposure, RandomSample
from .cvfolds import FoldAssignment, make_cv_folds
from .evaluation import (
    EstimatorVariant,
    ExperimentGrid,
    ExperimentReport,
    ReplicationConfig,
    ReplicationRecord,
    pointwise_bias,
    pointwise_mse,
    relative_efficiency,
    run_experiment,
    run_replication,
    standard_variants,
)
from .learners import (
    LearnerKind,
    LearnerSpec,
    PropensityModel,
    default_library,
    fit_learner,
    fit_weighted_forest,
    fit_weighted_lasso,
    fit_weighted_logistic,
    fit_weighted_nnet,
    fit_weighted_tree,
    reduced_library,
)
from .losses import LossFunction, LossKind, inverse_logit, weighted_log_likelihood
from .simulate import (
    DgpSpec,
    RngStream,
    draw_population_subject,
    enumerate_patterns,
    marginal_exposure_probability,
    sample_conditional_cohort,
    sample_random_cohort,
    true_propensity,
)
from .stacking import (
    CrossValidatedPredictions,
    EnsembleFit,
    cross_validated_predictions,
    external_cv_super_learner,
    fit_super_learner,
    predict_ensemble,
    solve_meta_weights,
)
from .weights import WeightVector, compute_observation_weights, uniform_weights

__all__ = [
    "Cohort",
    "ConditionalOnExposure",
    "CrossValidatedPredictions",
    "DgpSpec",
    "EnsembleFit",
    "EstimatorVariant",
    "ExperimentGrid",
    "ExperimentReport",
    "FoldAssignment",
    "LearnerKind",
    "LearnerSpec",
    "LossFunction",
    "LossKind",
    "PropensityModel",
    "RandomSample",
    "ReplicationConfig",
    "ReplicationRecord",
    "RngStream",
    "WeightVector",
    "compute_observation_weights",
    "cross_validated_predictions",
    "default_library",
    "draw_population_subject",
    "enumerate_patterns",
    "external_cv_super_learner",
    "fit_learner",
    "fit_super_learner",
    "fit_weighted_forest",
    "fit_weighted_lasso",
    "fit_weighted_logistic",
    "fit_weighted_nnet",
    "fit_weighted_tree",
    "inverse_logit",
    "make_cv_folds",
    "marginal_exposure_probability",
    "pointwise_bias",
    "pointwise_mse",
    "predict_ensemble",
    "reduced_library",
    "relative_efficiency",
    "run_experiment",
    "run_replication",
    "sample_conditional_cohort",
    "sample_random_cohort",
    "solve_meta_weights",
    "standard_variants",
    "true_propensity",
    "uniform_weights",
    "weighted_log_likelihood",
]
