"""Cohort data model: covariates, binary exposure, and sampling design.

A cohort either came from conditional-on-exposure sampling (a fixed number
of exposed subjects plus ``round(n_exposed * C)`` unexposed controls) or is
a plain random sample from the source population. The design metadata is
what downstream weight computation keys on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConditionalOnExposure:
    """Design of a cohort sampled conditionally on exposure status.

    ``controls_per_case`` is the nominal average number of unexposed
    controls per exposed subject; it need not be an integer. The realized
    control count is ``round(n_exposed * controls_per_case)``.
    """

    n_exposed: int
    controls_per_case: float

    def __post_init__(self) -> None:
        if self.n_exposed < 1:
            raise ValueError(f"n_exposed must be >= 1, got {self.n_exposed}")
        if not (self.controls_per_case > 0):
            raise ValueError(
                f"controls_per_case must be positive, got {self.controls_per_case}"
            )

    @property
    def n_controls(self) -> int:
        return int(round(self.n_exposed * self.controls_per_case))


@dataclass(frozen=True)
class RandomSample:
    """Design of a cohort drawn from the source population without conditioning."""

    n_rows: int

    def __post_init__(self) -> None:
        if self.n_rows < 1:
            raise ValueError(f"n_rows must be >= 1, got {self.n_rows}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Cohort:
    """An immutable cohort: N x p covariates, 0/1 exposure, design metadata.

    Parameters
    ----------
    covariates : ndarray, shape (N, p)
        Real-valued covariate matrix with no missing entries.
    exposure : ndarray, shape (N,)
        Exposure indicators, exactly 0 or 1.
    design : ConditionalOnExposure or RandomSample
    ids : ndarray, shape (N,), optional
        Opaque row identifiers; defaults to 0..N-1.
    true_propensity : ndarray, shape (N,), optional
        Generation-time propensities. Only simulated cohorts carry these;
        ingested data never does.
    """

    covariates: np.ndarray
    exposure: np.ndarray
    design: ConditionalOnExposure | RandomSample
    ids: np.ndarray | None = None
    true_propensity: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"covariates must be 2-d, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariate matrix contains missing or non-finite entries")
        e = np.asarray(self.exposure)
        if e.shape != (X.shape[0],):
            raise ValueError(
                f"exposure length {e.shape} does not match {X.shape[0]} covariate rows"
            )
        if not np.all(np.isin(e, (0, 1))):
            raise ValueError("exposure values must be exactly 0 or 1")
        e = e.astype(np.int8)

        ids = self.ids
        if ids is None:
            ids = np.arange(X.shape[0])
        ids = np.asarray(ids)
        if ids.shape != (X.shape[0],):
            raise ValueError("ids length does not match cohort size")

        n_exposed = int(np.sum(e == 1))
        n_controls = int(np.sum(e == 0))
        if isinstance(self.design, ConditionalOnExposure):
            if n_exposed != self.design.n_exposed:
                raise ValueError(
                    f"design says {self.design.n_exposed} exposed rows, found {n_exposed}"
                )
            if n_controls != self.design.n_controls:
                raise ValueError(
                    f"design implies {self.design.n_controls} control rows "
                    f"(n_exposed x C rounded), found {n_controls}"
                )
        elif isinstance(self.design, RandomSample):
            if self.design.n_rows != X.shape[0]:
                raise ValueError(
                    f"design says {self.design.n_rows} rows, cohort has {X.shape[0]}"
                )
        else:
            raise TypeError(f"unknown design {self.design!r}")

        tp = self.true_propensity
        if tp is not None:
            tp = np.asarray(tp, dtype=float)
            if tp.shape != (X.shape[0],):
                raise ValueError("true_propensity length does not match cohort size")
            if np.any(tp < 0) or np.any(tp > 1):
                raise ValueError("true_propensity values must lie in [0, 1]")
            tp = _freeze(tp)

        object.__setattr__(self, "covariates", _freeze(X))
        object.__setattr__(self, "exposure", _freeze(e))
        object.__setattr__(self, "ids", _freeze(ids))
        object.__setattr__(self, "true_propensity", tp)

    @property
    def n_rows(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_exposed(self) -> int:
        return int(np.sum(self.exposure == 1))

    def permuted(self, order: np.ndarray) -> "Cohort":
        """The same cohort with rows reordered by ``order``."""
        order = np.asarray(order)
        return Cohort(
            covariates=self.covariates[order],
            exposure=self.exposure[order],
            design=self.design,
            ids=self.ids[order],
            true_propensity=None if self.true_propensity is None else self.true_propensity[order],
        )
