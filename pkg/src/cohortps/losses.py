"""Loss functions and probability transforms shared by all learners.

Every learner in this package is trained against a weighted binomial
log-likelihood (or weighted squared error for the meta-combination step),
with predicted probabilities clamped away from {0, 1} before any log is
taken: trees and forests legitimately emit exact 0/1 leaf probabilities.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LossKind(enum.Enum):
    NEG_LOG_LIKELIHOOD = "neg_log_likelihood"
    SQUARED_ERROR = "squared_error"


@dataclass(frozen=True)
class LossFunction:
    """A loss selector plus the probability-clipping constant it evaluates with.

    Parameters
    ----------
    kind : LossKind
        Negative binomial log-likelihood or squared error.
    clip_epsilon : float
        Probabilities are clamped to [clip_epsilon, 1 - clip_epsilon] before
        logs are taken. Must lie in (0, 0.5).
    """

    kind: LossKind = LossKind.NEG_LOG_LIKELIHOOD
    clip_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if not isinstance(self.kind, LossKind):
            raise TypeError(f"kind must be a LossKind, got {self.kind!r}")
        if not (0.0 < self.clip_epsilon < 0.5):
            raise ValueError(f"clip_epsilon must be in (0, 0.5), got {self.clip_epsilon}")

    def mean_loss(self, probs: np.ndarray, exposure: np.ndarray, weights: np.ndarray) -> float:
        """Weight-averaged loss of predicted probabilities against 0/1 exposure."""
        probs = np.asarray(probs, dtype=float)
        exposure = np.asarray(exposure, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if self.kind is LossKind.NEG_LOG_LIKELIHOOD:
            total = -weighted_log_likelihood(probs, exposure, weights, self.clip_epsilon)
        else:
            total = float(np.sum(weights * (probs - exposure) ** 2))
        return total / float(np.sum(weights))


def clip_probabilities(probs: np.ndarray, clip_epsilon: float = 1e-6) -> np.ndarray:
    """Clamp probabilities into [clip_epsilon, 1 - clip_epsilon]."""
    if not (0.0 < clip_epsilon < 0.5):
        raise ValueError(f"clip_epsilon must be in (0, 0.5), got {clip_epsilon}")
    return np.clip(probs, clip_epsilon, 1.0 - clip_epsilon)


def inverse_logit(x):
    """Numerically stable logistic function 1 / (1 + exp(-x)).

    Evaluates the positive and negative branches separately so that large
    |x| saturates to 0 or 1 without overflow. Accepts scalars or arrays;
    output lies in (0, 1) up to float64 saturation.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("inverse_logit requires finite input")
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ez = np.exp(arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def logit(p):
    """Inverse of :func:`inverse_logit` on (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("logit requires arguments strictly inside (0, 1)")
    out = np.log(arr) - np.log1p(-arr)
    if np.isscalar(p) or np.ndim(p) == 0:
        return float(out)
    return out


def weighted_log_likelihood(
    probs: np.ndarray,
    exposure: np.ndarray,
    weights: np.ndarray,
    clip_epsilon: float = 1e-6,
) -> float:
    """Weighted binomial log-likelihood sum with probability clipping.

    Returns sum_i w_i * [E_i log p~_i + (1 - E_i) log(1 - p~_i)] where
    p~ clamps probs to [clip_epsilon, 1 - clip_epsilon]. Always finite.

    Raises
    ------
    ValueError
        On length mismatch or non-finite probabilities.
    """
    probs = np.asarray(probs, dtype=float)
    exposure = np.asarray(exposure, dtype=float)
    w = np.asarray(weights, dtype=float)
    if probs.shape != exposure.shape or probs.shape != w.shape:
        raise ValueError(
            f"length mismatch: probs {probs.shape}, exposure {exposure.shape}, weights {w.shape}"
        )
    if not np.all(np.isfinite(probs)):
        raise ValueError("non-finite probability passed to weighted_log_likelihood")
    p = clip_probabilities(probs, clip_epsilon)
    return float(np.sum(w * (exposure * np.log(p) + (1.0 - exposure) * np.log1p(-p))))
