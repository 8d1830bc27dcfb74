"""Single-hidden-layer neural network with observation weights.

Logistic activations everywhere, a scalar sigmoid output, and an L2 penalty
(weight decay) on every connection weight including biases. Training is
deterministic full-batch gradient descent with Armijo backtracking from one
seeded uniform(-0.5, 0.5) initialization. Duplicate (covariates, class)
rows are merged with summed weights before training; the objective is a
weighted sum over rows, so the fit is exactly the same.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..cohort import Cohort
from ..weights import WeightVector
from .base import (
    LearnerKind,
    LearnerSpec,
    PropensityModel,
    fit_info_from,
    validate_training_inputs,
)
from ._compress import compress_rows

_ARMIJO_C = 1e-4
_MAX_BACKTRACKS = 40


@njit(cache=True, fastmath=True)
def _forward(theta, Xb, H):
    """Hidden activations and output probabilities for design Xb = [1 X]."""
    n, p1 = Xb.shape
    W1 = np.ascontiguousarray(theta[: p1 * H]).reshape(p1, H)
    W2 = theta[p1 * H :]
    A = Xb @ W1
    for i in range(n):
        for h in range(H):
            a = A[i, h]
            if a >= 0.0:
                A[i, h] = 1.0 / (1.0 + np.exp(-a))
            else:
                ea = np.exp(a)
                A[i, h] = ea / (1.0 + ea)
    out = np.empty(n)
    for i in range(n):
        e = W2[0]
        for h in range(H):
            e += A[i, h] * W2[1 + h]
        if e >= 0.0:
            out[i] = 1.0 / (1.0 + np.exp(-e))
        else:
            ee = np.exp(e)
            out[i] = ee / (1.0 + ee)
    return A, out


@njit(cache=True, fastmath=True)
def _loss_of(out, y, w, theta, decay):
    val = 0.0
    for i in range(out.size):
        o = out[i]
        if o < 1e-12:
            o = 1e-12
        elif o > 1.0 - 1e-12:
            o = 1.0 - 1e-12
        val -= w[i] * (y[i] * np.log(o) + (1.0 - y[i]) * np.log(1.0 - o))
    for t in range(theta.size):
        val += decay * theta[t] * theta[t]
    return val


@njit(cache=True, fastmath=True)
def _value(theta, Xb, y, w, H, decay):
    _, out = _forward(theta, Xb, H)
    return _loss_of(out, y, w, theta, decay)


@njit(cache=True, fastmath=True)
def _value_and_grad(theta, Xb, y, w, H, decay):
    """Weighted cross-entropy + decay * ||theta||^2, with its gradient."""
    n, p1 = Xb.shape
    A, out = _forward(theta, Xb, H)
    W2 = theta[p1 * H :]
    val = _loss_of(out, y, w, theta, decay)

    grad = np.empty(theta.size)
    d2 = np.empty(n)
    for i in range(n):
        d2[i] = w[i] * (out[i] - y[i])
    # output layer
    g2 = grad[p1 * H :]
    g2[0] = np.sum(d2)
    for h in range(H):
        s = 0.0
        for i in range(n):
            s += d2[i] * A[i, h]
        g2[1 + h] = s
    # hidden layer: D1 = (d2 outer W2[1:]) * A(1-A), gW1 = Xb^T @ D1
    D1 = np.empty((n, H))
    for i in range(n):
        for h in range(H):
            D1[i, h] = d2[i] * W2[1 + h] * A[i, h] * (1.0 - A[i, h])
    G1 = Xb.T @ D1
    g1 = grad[: p1 * H].reshape(p1, H)
    for j in range(p1):
        for h in range(H):
            g1[j, h] = G1[j, h]
    for t in range(theta.size):
        grad[t] += 2.0 * decay * theta[t]
    return val, grad


@njit(cache=True, fastmath=True)
def _train(theta0, Xb, y, w, H, decay, max_iter, grad_tol):
    """Gradient descent with backtracking line search; returns the best iterate."""
    theta = theta0.copy()
    val, grad = _value_and_grad(theta, Xb, y, w, H, decay)
    step = 1.0
    converged = False
    n_iter = 0
    for it in range(max_iter):
        n_iter = it + 1
        gmax = 0.0
        gsq = 0.0
        for t in range(grad.size):
            a = abs(grad[t])
            if a > gmax:
                gmax = a
            gsq += grad[t] * grad[t]
        if gmax < grad_tol:
            converged = True
            break

        accepted = False
        cand = theta
        for _ in range(_MAX_BACKTRACKS):
            cand = theta - step * grad
            cval = _value(cand, Xb, y, w, H, decay)
            if cval <= val - _ARMIJO_C * step * gsq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # step underflow: no further descent possible
        theta = cand
        val, grad = _value_and_grad(theta, Xb, y, w, H, decay)
        step = min(step * 2.0, 1e4)

    return theta, val, converged, n_iter


class NeuralNetModel(PropensityModel):
    def __init__(self, spec, info, theta, hidden_size, converged, n_iter, objective):
        super().__init__(spec, info)
        self.theta = np.asarray(theta, dtype=float)
        self.hidden_size = int(hidden_size)
        self.converged = bool(converged)
        self.n_iter = int(n_iter)
        self.objective = float(objective)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        Xb = np.column_stack([np.ones(X.shape[0]), X])
        _, out = _forward(self.theta, np.ascontiguousarray(Xb), self.hidden_size)
        return out


def nnet_objective(theta, X, y, w, hidden_size, weight_decay):
    """Objective and gradient at arbitrary parameters (used by gradient checks)."""
    Xb = np.ascontiguousarray(np.column_stack([np.ones(X.shape[0]), X]))
    return _value_and_grad(
        np.asarray(theta, dtype=float),
        Xb,
        np.asarray(y, dtype=float),
        np.asarray(w, dtype=float),
        int(hidden_size),
        float(weight_decay),
    )


def initial_parameters(n_covariates: int, hidden_size: int, seed: int, init_range: float = 0.5):
    """The seeded uniform(-init_range, init_range) starting point."""
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed)])))
    n_params = (n_covariates + 1) * hidden_size + hidden_size + 1
    return gen.uniform(-init_range, init_range, n_params)


def fit_weighted_nnet(
    cohort: Cohort, weights: WeightVector, spec: LearnerSpec | None = None
) -> NeuralNetModel:
    """Train the network; non-convergence returns the best iterate with a warning flag."""
    if spec is None:
        spec = LearnerSpec(kind=LearnerKind.NEURAL_NET)
    if spec.kind is not LearnerKind.NEURAL_NET:
        raise ValueError(f"expected a neural_net spec, got {spec.kind}")
    X, y, w = validate_training_inputs(cohort, weights)
    n, p = X.shape
    if n <= p + 1:
        raise ValueError(f"need N > p+1 rows to train, got N={n}, p={p}")
    X, y, w = compress_rows(X, y, w)
    hp = spec.hyperparameters
    H = int(hp["hidden_size"])

    theta0 = initial_parameters(p, H, spec.seed, hp["init_range"])
    Xb = np.ascontiguousarray(np.column_stack([np.ones(y.size), X]))
    theta, objective, converged, n_iter = _train(
        theta0, Xb, y, w, H, float(hp["weight_decay"]),
        int(hp["max_iter"]), float(hp["grad_tol"]),
    )
    warnings = () if converged else ("gradient_descent_iteration_cap",)
    return NeuralNetModel(
        spec, fit_info_from(cohort, weights, warnings),
        theta=theta, hidden_size=H, converged=converged, n_iter=n_iter,
        objective=objective,
    )
