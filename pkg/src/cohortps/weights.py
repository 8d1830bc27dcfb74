"""Exposure-probability observation weights.

In a cohort sampled conditionally on exposure, exposed rows get raw weight
``w`` (the source-population exposure probability) and control rows get
``(1 - w) / C``. With those weights, a weighted fit on the conditional
sample targets the same propensity score function a random sample would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort, ConditionalOnExposure, RandomSample

_NORMALIZED_RTOL = 1e-10


@dataclass(frozen=True)
class WeightVector:
    """Per-observation weights plus the provenance they were computed from.

    ``w_source`` and ``controls_per_case`` are populated by
    :func:`compute_observation_weights`; ad-hoc weight vectors built with
    :meth:`from_values` leave them unset.
    """

    values: np.ndarray
    w_source: float | None = None
    controls_per_case: float | None = None
    normalized: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("weight values must be a 1-d vector")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("all weights must be strictly positive and finite")
        if self.w_source is not None and not (0.0 < self.w_source < 1.0):
            raise ValueError(f"w_source must lie in (0, 1), got {self.w_source}")
        if self.normalized:
            total = float(np.sum(v))
            if abs(total - v.size) > _NORMALIZED_RTOL * v.size:
                raise ValueError(
                    f"normalized weights must sum to N={v.size}, got {total!r}"
                )
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values: np.ndarray, normalized: bool = False) -> "WeightVector":
        """Wrap an arbitrary positive weight vector (no sampling provenance)."""
        return cls(values=np.asarray(values, dtype=float), normalized=normalized)

    def __len__(self) -> int:
        return self.values.size

    def rescaled_to(self, target_sum: float) -> "WeightVector":
        """The same relative weights rescaled so they sum to ``target_sum``."""
        v = self.values * (target_sum / float(np.sum(self.values)))
        return WeightVector(
            values=v,
            w_source=self.w_source,
            controls_per_case=self.controls_per_case,
            normalized=abs(target_sum - v.size) <= _NORMALIZED_RTOL * v.size,
        )

    def subset(self, rows: np.ndarray, renormalize: bool | None = None) -> "WeightVector":
        """Weights restricted to ``rows``.

        When ``renormalize`` (default: this vector's ``normalized`` flag) is
        true, the subset is rescaled to sum to its own row count so that
        penalized learners see a comparable effective penalty inside
        cross-validation folds.
        """
        v = self.values[np.asarray(rows)]
        if renormalize is None:
            renormalize = self.normalized
        if renormalize:
            v = v * (v.size / float(np.sum(v)))
        return WeightVector(
            values=v,
            w_source=self.w_source,
            controls_per_case=self.controls_per_case,
            normalized=bool(renormalize),
        )


def compute_observation_weights(
    cohort: Cohort, w: float, normalize: bool = True
) -> WeightVector:
    """Observation weights for a conditional-on-exposure cohort.

    Exposed rows receive raw weight ``w`` and control rows ``(1 - w) / C``,
    where ``C`` is the design's controls-per-case. With ``normalize`` the
    raw weights are rescaled by one positive constant to sum to N, keeping
    penalty strength in penalized learners comparable to an unweighted fit;
    raw mode reproduces the weighted-likelihood display exactly.

    Raises
    ------
    ValueError
        If the cohort is a random sample (weights are unity there; use
        :func:`uniform_weights`), if ``w`` is outside (0, 1), or if the
        design's ``C`` is not positive.
    """
    if isinstance(cohort.design, RandomSample):
        raise ValueError(
            "cohort is a RandomSample: observation weights are unity there, "
            "use uniform_weights instead"
        )
    if not isinstance(cohort.design, ConditionalOnExposure):
        raise TypeError(f"unsupported design {cohort.design!r}")
    if not (0.0 < w < 1.0):
        raise ValueError(f"w must lie strictly inside (0, 1), got {w}")
    C = cohort.design.controls_per_case
    if not (C > 0):
        raise ValueError(f"controls_per_case must be positive, got {C}")

    values = np.where(cohort.exposure == 1, w, (1.0 - w) / C).astype(float)
    if normalize:
        values = values * (values.size / float(np.sum(values)))
    return WeightVector(
        values=values,
        w_source=w,
        controls_per_case=C,
        normalized=bool(normalize),
    )


def uniform_weights(cohort: Cohort) -> WeightVector:
    """Unit weights: the unweighted baseline, and the right choice for random samples."""
    return WeightVector(values=np.ones(cohort.n_rows), normalized=True)
