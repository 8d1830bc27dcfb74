"""Observation-weighted stacked ensemble (super learner).

The procedure: assign observation weights, produce out-of-fold predictions
for every library member under k-fold cross-validation, solve for convex
meta-weights that minimize the weighted loss of the combined out-of-fold
predictions against exposure, then refit every learner on the full cohort
and combine with those fixed meta-weights. Cross-validating the whole
procedure (external CV) is available as a post-hoc diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import nnls as _scipy_nnls

from .cohort import Cohort, RandomSample
from .cvfolds import FoldAssignment, make_cv_folds
from .learners import LearnerSpec, derive_seed, fit_learner
from .losses import LossFunction, LossKind
from .weights import WeightVector

__all__ = [
    "CrossValidatedPredictions",
    "EnsembleFit",
    "ExternalCvResult",
    "FoldAssignment",
    "StackingError",
    "audit_out_of_fold",
    "cross_validated_predictions",
    "external_cv_super_learner",
    "fit_super_learner",
    "make_cv_folds",
    "predict_ensemble",
    "solve_meta_weights",
]

_SIMPLEX_TOL = 1e-10
_ZERO_ALPHA = 1e-6


class StackingError(RuntimeError):
    """A learner failed inside the stacking procedure."""

    def __init__(self, learner: str, fold: int | None, original: Exception):
        where = f"fold {fold}" if fold is not None else "full-data refit"
        super().__init__(f"learner '{learner}' failed in {where}: {original}")
        self.learner = learner
        self.fold = fold
        self.original = original


def _subset_cohort(cohort: Cohort, rows: np.ndarray) -> Cohort:
    # training subsets lose the conditional design (counts no longer match)
    rows = np.asarray(rows)
    return Cohort(
        covariates=cohort.covariates[rows],
        exposure=cohort.exposure[rows],
        design=RandomSample(n_rows=rows.size),
        ids=cohort.ids[rows],
        true_propensity=None
        if cohort.true_propensity is None
        else cohort.true_propensity[rows],
    )


@dataclass(frozen=True)
class CrossValidatedPredictions:
    """Out-of-fold prediction matrix Z: column l holds learner l's predictions,
    each produced by a model never trained on that row."""

    Z: np.ndarray
    learner_specs: tuple
    folds: FoldAssignment

    def __post_init__(self) -> None:
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != len(self.learner_specs):
            raise ValueError("Z must be N x L with one column per learner spec")
        if np.any(Z < 0.0) or np.any(Z > 1.0) or not np.all(np.isfinite(Z)):
            raise ValueError("cross-validated predictions must lie in [0, 1]")
        Z = np.ascontiguousarray(Z)
        Z.flags.writeable = False
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "learner_specs", tuple(self.learner_specs))


def _fold_spec(spec: LearnerSpec, fold: int) -> LearnerSpec:
    return spec.with_seed(derive_seed(spec.seed, fold))


def cross_validated_predictions(
    cohort: Cohort,
    weights: WeightVector,
    library: list[LearnerSpec],
    folds: FoldAssignment,
) -> CrossValidatedPredictions:
    """Fit every learner on each fold complement (with its observation
    weights, re-normalized to the complement size when normalization is
    active) and predict the held-out fold."""
    if not library:
        raise ValueError("learner library must be non-empty")
    n = cohort.n_rows
    Z = np.empty((n, len(library)))
    for f in range(1, folds.k + 1):
        tr = folds.train_rows(f)
        te = folds.test_rows(f)
        sub = _subset_cohort(cohort, tr)
        subw = weights.subset(tr)
        X_te = cohort.covariates[te]
        for l, spec in enumerate(library):
            try:
                model = fit_learner(_fold_spec(spec, f), sub, subw)
            except Exception as exc:
                raise StackingError(spec.name, f, exc) from exc
            Z[te, l] = model.predict(X_te)
    return CrossValidatedPredictions(Z=Z, learner_specs=tuple(library), folds=folds)


def _meta_objective(alpha, Z, y, w, loss: LossFunction):
    return loss.mean_loss(Z @ alpha, y, w)


@njit(cache=True)
def _eg_mean_nll(Z, y, w, alpha, eps, wsum):
    n = y.size
    total = 0.0
    for i in range(n):
        m = 0.0
        for l in range(alpha.size):
            m += Z[i, l] * alpha[l]
        if m < eps:
            m = eps
        elif m > 1.0 - eps:
            m = 1.0 - eps
        total -= w[i] * (y[i] * np.log(m) + (1.0 - y[i]) * np.log(1.0 - m))
    return total / wsum


@njit(cache=True)
def _eg_solve(Z, y, w, eps):
    """Exponentiated-gradient descent over the simplex from the uniform
    vector; step size halves on non-improvement, stops when the objective
    change drops below 1e-10 (or after 10000 iterations)."""
    n, L = Z.shape
    wsum = 0.0
    for i in range(n):
        wsum += w[i]
    alpha = np.full(L, 1.0 / L)
    f = _eg_mean_nll(Z, y, w, alpha, eps, wsum)
    g = np.empty(L)
    cand = np.empty(L)
    eta = 1.0
    for _ in range(10000):
        for l in range(L):
            g[l] = 0.0
        for i in range(n):
            m = 0.0
            for l in range(L):
                m += Z[i, l] * alpha[l]
            if m < eps:
                m = eps
            elif m > 1.0 - eps:
                m = 1.0 - eps
            ri = w[i] * (y[i] / m - (1.0 - y[i]) / (1.0 - m))
            for l in range(L):
                g[l] -= Z[i, l] * ri
        gmean = 0.0
        for l in range(L):
            g[l] /= wsum
            gmean += g[l]
        gmean /= L
        for l in range(L):
            g[l] -= gmean  # constant shifts cancel in the multiplicative update

        accepted = False
        fc = f
        while eta >= 1e-16:
            umax = -1e300
            for l in range(L):
                u = -eta * g[l]
                cand[l] = u
                if u > umax:
                    umax = u
            tot = 0.0
            for l in range(L):
                cand[l] = alpha[l] * np.exp(cand[l] - umax)
                tot += cand[l]
            for l in range(L):
                cand[l] /= tot
            fc = _eg_mean_nll(Z, y, w, cand, eps, wsum)
            if fc <= f:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        change = f - fc
        for l in range(L):
            alpha[l] = cand[l]
        f = fc
        if change < 1e-10:
            break
        eta = min(eta * 1.5, 1e3)
    return alpha


def _solve_meta_nll(Z, y, w, loss: LossFunction):
    alpha = _eg_solve(
        np.ascontiguousarray(Z), np.asarray(y, dtype=float),
        np.asarray(w, dtype=float), loss.clip_epsilon,
    )
    return alpha / np.sum(alpha)


def _solve_meta_nnls(Z, y, w):
    sw = np.sqrt(w)
    a, _ = _scipy_nnls(sw[:, None] * Z, sw * y)
    total = float(np.sum(a))
    if total <= 0.0:
        return np.full(Z.shape[1], 1.0 / Z.shape[1]), ("nnls_all_zero_fallback",)
    return a / total, ()


def solve_meta_weights(
    Z: CrossValidatedPredictions | np.ndarray,
    exposure: np.ndarray,
    weights: WeightVector | np.ndarray,
    loss: LossFunction = LossFunction(),
) -> np.ndarray:
    """Simplex meta-weights minimizing the weighted loss of Z @ alpha.

    Negative log-likelihood loss is solved by exponentiated-gradient descent
    from the uniform vector with step-size halving on non-improvement,
    stopping when the objective change drops below 1e-10 (or at 10000
    iterations). Squared error is solved by weighted non-negative least
    squares followed by normalization to sum one; an all-zero NNLS solution
    falls back to the uniform vector.
    """
    Zm = Z.Z if isinstance(Z, CrossValidatedPredictions) else np.asarray(Z, dtype=float)
    if Zm.ndim != 2 or Zm.shape[1] < 1:
        raise ValueError("Z must have at least one column")
    y = np.asarray(exposure, dtype=float)
    w = weights.values if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    if Zm.shape[0] != y.size or y.size != w.size:
        raise ValueError("Z, exposure, and weights must agree in length")

    if Zm.shape[1] == 1:
        return np.array([1.0])
    if loss.kind is LossKind.NEG_LOG_LIKELIHOOD:
        alpha = _solve_meta_nll(Zm, y, w, loss)
    else:
        alpha, _ = _solve_meta_nnls(Zm, y, w)
    assert np.all(alpha >= 0) and abs(float(np.sum(alpha)) - 1.0) <= _SIMPLEX_TOL
    return alpha


@dataclass(frozen=True)
class EnsembleFit:
    """The stacked propensity score function: full-data base models combined
    with fixed simplex meta-weights."""

    alpha: np.ndarray
    base_models: tuple
    meta_loss: LossFunction
    folds: FoldAssignment
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        a = np.asarray(self.alpha, dtype=float)
        if np.any(a < 0) or abs(float(np.sum(a)) - 1.0) > _SIMPLEX_TOL:
            raise ValueError("alpha must be non-negative and sum to 1")
        if a.size != len(self.base_models):
            raise ValueError("one alpha per base model required")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "base_models", tuple(self.base_models))

    @property
    def learner_names(self) -> tuple:
        return tuple(m.spec.name for m in self.base_models)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_ensemble(self, X)


def predict_ensemble(fit: EnsembleFit, X: np.ndarray) -> np.ndarray:
    """Convex combination of the base models' predictions; lies in [0, 1]."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[0])
    for a, model in zip(fit.alpha, fit.base_models):
        if a > 0.0:
            out += a * model.predict(X)
    return np.clip(out, 0.0, 1.0)


def fit_super_learner(
    cohort: Cohort,
    weights: WeightVector,
    library: list[LearnerSpec],
    k: int = 10,
    loss: LossFunction = LossFunction(),
    seed: int = 0,
    stratified: bool = True,
) -> EnsembleFit:
    """Run the full stacking procedure and return the fitted ensemble.

    Steps: build stratified folds from ``seed``, collect out-of-fold
    predictions for the library, solve the simplex meta-weights under
    ``loss``, then refit every learner on the complete cohort with its
    observation weights. Diagnostics record each learner's weighted CV
    loss, the ensemble's CV loss, and effectively-zero meta-weights.
    """
    folds = make_cv_folds(cohort.exposure, k=k, seed=seed, stratified=stratified)
    cvp = cross_validated_predictions(cohort, weights, library, folds)
    y = cohort.exposure.astype(float)
    alpha = solve_meta_weights(cvp, y, weights, loss)

    base_models = []
    for spec in library:
        try:
            base_models.append(fit_learner(spec, cohort, weights))
        except Exception as exc:
            raise StackingError(spec.name, None, exc) from exc

    w = weights.values
    per_learner_cv_loss = {
        spec.name: loss.mean_loss(cvp.Z[:, l], y, w) for l, spec in enumerate(library)
    }
    diagnostics = {
        "cv_loss_by_learner": per_learner_cv_loss,
        "cv_loss_ensemble": loss.mean_loss(cvp.Z @ alpha, y, w),
        "zero_alpha_learners": tuple(
            spec.name for l, spec in enumerate(library) if alpha[l] < _ZERO_ALPHA
        ),
    }
    return EnsembleFit(
        alpha=alpha,
        base_models=tuple(base_models),
        meta_loss=loss,
        folds=folds,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class ExternalCvResult:
    """Honest out-of-fold ensemble predictions from cross-validating the
    entire stacking procedure, with per-fold meta-weights and losses."""

    oof_predictions: np.ndarray
    folds: FoldAssignment
    alphas: np.ndarray
    fold_losses: np.ndarray
    learner_specs: tuple


def external_cv_super_learner(
    cohort: Cohort,
    weights: WeightVector,
    library: list[LearnerSpec],
    k_outer: int = 10,
    k_inner: int = 10,
    loss: LossFunction = LossFunction(),
    seed: int = 0,
) -> ExternalCvResult:
    """Cross-validate the whole stacking procedure.

    Each outer fold's complement gets the complete super learner (with
    re-normalized weights and its own derived seed); the held-out fold is
    predicted by that ensemble. No row is ever predicted by a procedure
    that saw it in training.
    """
    if k_outer < 2:
        raise ValueError(f"k_outer must be >= 2, got {k_outer}")
    outer = make_cv_folds(cohort.exposure, k=k_outer, seed=derive_seed(seed, 0xEC), stratified=True)
    n = cohort.n_rows
    oof = np.empty(n)
    alphas = np.empty((k_outer, len(library)))
    fold_losses = np.empty(k_outer)
    y = cohort.exposure.astype(float)
    for f in range(1, k_outer + 1):
        tr = outer.train_rows(f)
        te = outer.test_rows(f)
        fit = fit_super_learner(
            _subset_cohort(cohort, tr),
            weights.subset(tr),
            library,
            k=k_inner,
            loss=loss,
            seed=derive_seed(seed, f),
        )
        preds = fit.predict(cohort.covariates[te])
        oof[te] = preds
        alphas[f - 1] = fit.alpha
        fold_losses[f - 1] = loss.mean_loss(preds, y[te], weights.values[te])
    return ExternalCvResult(
        oof_predictions=oof,
        folds=outer,
        alphas=alphas,
        fold_losses=fold_losses,
        learner_specs=tuple(library),
    )


def audit_out_of_fold(
    cvp: CrossValidatedPredictions, cohort: Cohort, weights: WeightVector
) -> bool:
    """Re-derive every Z entry from the recorded fold provenance.

    For each (fold, learner) this fits the learner directly on the fold
    complement (same derived seed, same re-normalized weights) and checks
    that the stored out-of-fold predictions match. Returns True only if
    every entry is reproduced, i.e. no prediction can have come from a
    model that saw its row.
    """
    folds = cvp.folds
    for f in range(1, folds.k + 1):
        tr = folds.train_rows(f)
        te = folds.test_rows(f)
        sub = _subset_cohort(cohort, tr)
        subw = weights.subset(tr)
        for l, spec in enumerate(cvp.learner_specs):
            model = fit_learner(_fold_spec(spec, f), sub, subw)
            if not np.array_equal(model.predict(cohort.covariates[te]), cvp.Z[te, l]):
                return False
    return True
