"""Weighted L1-penalized logistic regression along a regularization path.

The solver is the usual quadratic-approximation scheme: an outer reweighting
loop around cyclic coordinate descent on the working least-squares problem,
warm-started along a descending log-spaced lambda grid. Covariates are
standardized by weighted mean and variance; the intercept is unpenalized.
Lambda is chosen by internal weighted k-fold cross-validation on the
weighted log-loss and the model is refit on all rows at that lambda.

All loss normalization is by total weight rather than row count, so merging
duplicate rows (weights summed) leaves the entire path exactly unchanged.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..cohort import Cohort
from ..cvfolds import make_cv_folds
from ..losses import inverse_logit
from ..weights import WeightVector
from .base import (
    LearnerKind,
    LearnerSpec,
    PropensityModel,
    fit_info_from,
    validate_training_inputs,
)

_MIN_MU_VAR = 1e-5
_CD_TOL = 1e-9
_IRLS_TOL = 1e-8


@njit(cache=True)
def _solve_path(Xs, y, v, lambdas, b0_null):
    """Coordinate-descent path on standardized covariates.

    Xs : (n, p) standardized covariates (weighted mean 0, variance 1)
    v : positive observation weights (any scale; the objective divides by
        their sum, so only relative weights matter)
    Returns (B, b0): slopes (n_lambda, p) and intercepts (n_lambda,).
    The first grid point is the exact null model (the KKT solution at
    lambda_max). Each working quadratic is summarized by its Gram matrix,
    so coordinate passes cost O(p^2) rather than O(n p).
    """
    n, p = Xs.shape
    n_lam = lambdas.size
    B = np.zeros((n_lam, p))
    b0s = np.empty(n_lam)

    W = 0.0
    for i in range(n):
        W += v[i]

    beta = np.zeros(p)
    b0 = b0_null
    b0s[0] = b0_null

    eta = np.full(n, b0_null)
    omega = np.empty(n)
    z = np.empty(n)
    G = np.empty((p, p))  # sum_i omega x_j x_k
    g0 = np.empty(p)      # sum_i omega x_j
    c = np.empty(p)       # sum_i omega x_j z_i
    gb = np.empty(p)      # (G @ beta)_j, maintained incrementally

    for l in range(1, n_lam):
        lam = lambdas[l]
        for _ in range(50):
            # working quadratic at the current eta
            cz = 0.0
            w_total = 0.0
            for i in range(n):
                e = eta[i]
                if e >= 0.0:
                    mu = 1.0 / (1.0 + np.exp(-e))
                else:
                    ex = np.exp(e)
                    mu = ex / (1.0 + ex)
                s = mu * (1.0 - mu)
                if s < _MIN_MU_VAR:
                    s = _MIN_MU_VAR
                omega[i] = v[i] * s / W
                z[i] = e + (y[i] - mu) / s
                cz += omega[i] * z[i]
                w_total += omega[i]

            for j in range(p):
                for k in range(j, p):
                    s2 = 0.0
                    for i in range(n):
                        s2 += omega[i] * Xs[i, j] * Xs[i, k]
                    G[j, k] = s2
                    G[k, j] = s2
                s0 = 0.0
                sc = 0.0
                for i in range(n):
                    s0 += omega[i] * Xs[i, j]
                    sc += omega[i] * Xs[i, j] * z[i]
                g0[j] = s0
                c[j] = sc
                acc = 0.0
                for k in range(p):
                    acc += G[j, k] * beta[k]
                gb[j] = acc

            max_param_change = 0.0
            for _pass in range(1000):
                max_delta = 0.0
                for j in range(p):
                    if G[j, j] <= 1e-12 * w_total:
                        continue
                    rho = c[j] - b0 * g0[j] - gb[j] + G[j, j] * beta[j]
                    if rho > lam:
                        new = (rho - lam) / G[j, j]
                    elif rho < -lam:
                        new = (rho + lam) / G[j, j]
                    else:
                        new = 0.0
                    delta = new - beta[j]
                    if delta != 0.0:
                        for k in range(p):
                            gb[k] += G[k, j] * delta
                        beta[j] = new
                        if abs(delta) > max_delta:
                            max_delta = abs(delta)
                # unpenalized intercept
                s0 = 0.0
                for j in range(p):
                    s0 += g0[j] * beta[j]
                new_b0 = (cz - s0) / w_total
                d0 = new_b0 - b0
                if d0 != 0.0:
                    b0 = new_b0
                    if abs(d0) > max_delta:
                        max_delta = abs(d0)
                if max_delta > max_param_change:
                    max_param_change = max_delta
                if max_delta < _CD_TOL:
                    break

            for i in range(n):
                e = b0
                for j in range(p):
                    if beta[j] != 0.0:
                        e += Xs[i, j] * beta[j]
                eta[i] = e
            if max_param_change < _IRLS_TOL:
                break

        for j in range(p):
            B[l, j] = beta[j]
        b0s[l] = b0

    return B, b0s


class LassoModel(PropensityModel):
    def __init__(self, spec, info, lambdas, coef_path, intercept_path,
                 chosen_index, cv_loss_path, dropped_columns):
        super().__init__(spec, info)
        self.lambdas = lambdas
        self.coef_path = coef_path            # (n_lambda, p) on the original scale
        self.intercept_path = intercept_path  # (n_lambda,)
        self.chosen_index = int(chosen_index)
        self.cv_loss_path = cv_loss_path
        self.dropped_columns = tuple(dropped_columns)

    @property
    def lambda_chosen(self) -> float:
        return float(self.lambdas[self.chosen_index])

    @property
    def coef(self) -> np.ndarray:
        return self.coef_path[self.chosen_index]

    @property
    def intercept(self) -> float:
        return float(self.intercept_path[self.chosen_index])

    def predict_at(self, index: int, X: np.ndarray) -> np.ndarray:
        X = self._check_matrix(X)
        return inverse_logit(X @ self.coef_path[index] + self.intercept_path[index])

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return inverse_logit(X @ self.coef + self.intercept)


def _standardize(X, v):
    W = float(np.sum(v))
    mu = (v @ X) / W
    Xc = X - mu
    sd = np.sqrt((v @ (Xc * Xc)) / W)
    return mu, sd


def _path_compressed(Xc, yc, vc, lambdas, mu, sd, keep):
    """Solve the path on (already merged) weighted rows and return
    original-scale coefficient and intercept paths."""
    W = float(np.sum(vc))
    Xs = (Xc[:, keep] - mu[keep]) / sd[keep]
    ybar = float(np.clip((vc @ yc) / W, 1e-9, 1.0 - 1e-9))
    b0_null = float(np.log(ybar / (1.0 - ybar)))
    B, b0s = _solve_path(np.ascontiguousarray(Xs), yc, vc, lambdas, b0_null)
    coef = np.zeros((lambdas.size, mu.size))
    coef[:, keep] = B / sd[keep]
    intercept = b0s - coef[:, keep] @ (mu[keep])
    return coef, intercept


def _weighted_log_loss_path(probs, y, w, clip_epsilon=1e-6):
    """Column-wise weighted negative log-likelihood of an (n, L) matrix."""
    p = np.clip(probs, clip_epsilon, 1.0 - clip_epsilon)
    return -(w @ (y[:, None] * np.log(p) + (1.0 - y)[:, None] * np.log1p(-p)))


def fit_weighted_lasso(
    cohort: Cohort, weights: WeightVector, spec: LearnerSpec | None = None
) -> LassoModel:
    """Fit the weighted lasso-penalized logistic regression.

    The lambda grid holds ``n_lambda`` log-spaced values from lambda_max
    (the smallest lambda whose solution has all slopes zero, computed from
    the weighted score at the null model) down to
    ``lambda_min_ratio * lambda_max``. Constant covariate columns are
    dropped with a note in the fit metadata.
    """
    if spec is None:
        spec = LearnerSpec(kind=LearnerKind.LASSO)
    if spec.kind is not LearnerKind.LASSO:
        raise ValueError(f"expected a lasso spec, got {spec.kind}")
    X, y, w = validate_training_inputs(cohort, weights)
    n, p = X.shape
    if n < 20:
        raise ValueError(f"need N >= 20 rows for internal lambda selection, got {n}")
    hp = spec.hyperparameters

    W = float(np.sum(w))
    mu, sd = _standardize(X, w)
    keep = sd > 1e-12
    dropped = tuple(int(j) for j in np.flatnonzero(~keep))
    if not np.any(keep):
        raise ValueError("all covariate columns are constant")

    ybar = float(np.clip((w @ y) / W, 1e-9, 1.0 - 1e-9))
    Xs = (X[:, keep] - mu[keep]) / sd[keep]
    score = (w * (y - ybar)) @ Xs / W
    lambda_max = float(np.max(np.abs(score)))
    if lambda_max <= 0:
        lambda_max = 1e-3
    lambdas = np.geomspace(lambda_max, hp["lambda_min_ratio"] * lambda_max, hp["n_lambda"])

    # duplicate (covariates, class) rows merge exactly; index them once so
    # every fold's training set compresses with a bincount
    stacked = np.column_stack([X, y])
    cells, inverse = np.unique(stacked, axis=0, return_inverse=True)
    cell_X = np.ascontiguousarray(cells[:, :-1])
    cell_y = cells[:, -1].copy()

    def compressed(rows):
        vc = np.bincount(inverse[rows], weights=w[rows], minlength=cells.shape[0])
        live = vc > 0
        return cell_X[live], cell_y[live], vc[live]

    # internal weighted CV on the shared lambda grid
    k = int(hp["cv_folds"])
    counts = np.bincount(cohort.exposure, minlength=2)
    stratified = bool(counts.min() >= k)
    folds = make_cv_folds(cohort.exposure, k=k, seed=spec.seed, stratified=stratified)
    cv_loss = np.zeros(lambdas.size)
    for f in range(1, k + 1):
        tr = folds.train_rows(f)
        te = folds.test_rows(f)
        mu_f, sd_f = _standardize(X[tr], w[tr])
        keep_f = keep & (sd_f > 1e-12)
        coef_f, int_f = _path_compressed(*compressed(tr), lambdas, mu_f, sd_f, keep_f)
        probs = inverse_logit(X[te] @ coef_f.T + int_f)
        cv_loss += _weighted_log_loss_path(probs, y[te], w[te])
    chosen = int(np.argmin(cv_loss))

    coef_path, intercept_path = _path_compressed(
        *compressed(np.arange(n)), lambdas, mu, sd, keep
    )
    warnings = (f"dropped_constant_columns={dropped}",) if dropped else ()
    return LassoModel(
        spec,
        fit_info_from(cohort, weights, warnings),
        lambdas=lambdas,
        coef_path=coef_path,
        intercept_path=intercept_path,
        chosen_index=chosen,
        cv_loss_path=cv_loss,
        dropped_columns=dropped,
    )
