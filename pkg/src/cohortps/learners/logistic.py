"""Observation-weighted logistic regression fit by IRLS."""

from __future__ import annotations

import numpy as np

from ..cohort import Cohort
from ..losses import inverse_logit
from ..weights import WeightVector
from .base import (
    ConvergenceError,
    FitInfo,
    LearnerKind,
    LearnerSpec,
    PropensityModel,
    fit_info_from,
    validate_training_inputs,
)
from ._compress import compress_rows

# per-standard-deviation effect size beyond which we treat the fit as
# (quasi-)separated: the likelihood is flat out there and plain IRLS drifts
_SEPARATION_GUARD = 30.0


class LogisticModel(PropensityModel):
    def __init__(self, spec, info: FitInfo, intercept: float, coef: np.ndarray,
                 converged: bool, ridge_used: bool, n_iter: int):
        super().__init__(spec, info)
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=float)
        self.converged = converged
        self.ridge_used = ridge_used
        self.n_iter = n_iter

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return inverse_logit(X @ self.coef + self.intercept)


def _weighted_loglik(y, w, eta):
    # log-likelihood written to stay finite for large |eta|
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def fit_weighted_logistic(
    cohort: Cohort, weights: WeightVector, spec: LearnerSpec | None = None
) -> LogisticModel:
    """Maximize the weighted binomial log-likelihood by IRLS.

    Converges when the largest absolute coefficient change drops below the
    spec tolerance (default 1e-8) within the iteration cap (default 100).
    A singular or separated system triggers an automatic tiny ridge on the
    normal equations and a warning flag in the fit metadata; running out of
    iterations raises :class:`ConvergenceError` carrying the last iterate.
    """
    if spec is None:
        spec = LearnerSpec(kind=LearnerKind.LOGISTIC)
    if spec.kind is not LearnerKind.LOGISTIC:
        raise ValueError(f"expected a logistic spec, got {spec.kind}")
    X, y, w = validate_training_inputs(cohort, weights)
    n, p = X.shape
    if n <= p + 1:
        raise ValueError(f"need N > p+1 rows to fit logistic regression, got N={n}, p={p}")
    X, y, w = compress_rows(X, y, w)  # exact: the likelihood is additive in weights

    hp = spec.hyperparameters
    max_iter, tol, ridge = hp["max_iter"], hp["tol"], hp["ridge"]
    Xd = np.column_stack([np.ones(y.size), X])
    beta = np.zeros(p + 1)
    eta = Xd @ beta
    loglik = _weighted_loglik(y, w, eta)
    # column scales make the separation guard independent of covariate units
    col_sd = np.maximum(np.std(X, axis=0), 1e-3)
    scales = np.concatenate([[1.0], col_sd])
    ridge_used = False
    converged = False
    it = 0
    def objective(b, ll):
        # the tiny ridge becomes a real penalty once separation is suspected,
        # so the maximizer is finite and Newton can actually reach it
        return ll - 0.5 * ridge * float(b @ b) if ridge_used else ll

    for it in range(1, max_iter + 1):
        mu = inverse_logit(eta)
        s = np.maximum(mu * (1.0 - mu), 1e-10)
        H = Xd.T @ (w[:, None] * s[:, None] * Xd)
        g = Xd.T @ (w * (y - mu))
        if ridge_used:
            H = H + ridge * np.eye(p + 1)
            g = g - ridge * beta
        try:
            step = np.linalg.solve(H, g)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError("non-finite Newton step")
        except np.linalg.LinAlgError:
            if ridge_used:
                raise
            ridge_used = True
            continue

        # step-halving keeps the iteration monotone in the objective
        current = objective(beta, loglik)
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            cand_ll = _weighted_loglik(y, w, Xd @ cand)
            if objective(cand, cand_ll) >= current - 1e-12 * max(1.0, abs(current)):
                break
            scale *= 0.5
        delta = np.max(np.abs(cand - beta))
        beta, eta, loglik = cand, Xd @ cand, cand_ll

        if not ridge_used and (
            np.max(np.abs(beta) * scales) > _SEPARATION_GUARD or it >= max_iter // 2
        ):
            ridge_used = True
            continue
        if delta < tol:
            converged = True
            break

    warnings = ("ridge_fallback",) if ridge_used else ()
    info = fit_info_from(cohort, weights, warnings)
    model = LogisticModel(
        spec, info, intercept=beta[0], coef=beta[1:],
        converged=converged, ridge_used=ridge_used, n_iter=it,
    )
    if not converged:
        raise ConvergenceError(
            f"IRLS did not converge within {max_iter} iterations", last_iterate=model
        )
    return model
