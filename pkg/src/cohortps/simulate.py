"""Simulated source population and cohort samplers.

The population has six independent Bernoulli baseline covariates and a
logistic exposure model with fixed coefficients; cohorts are drawn either
conditionally on exposure (rejection sampling from the population stream)
or as plain random samples. Simulated cohorts carry their generation-time
propensities for later evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .cohort import Cohort, ConditionalOnExposure, RandomSample
from .losses import inverse_logit

_DRAW_GUARD = 10**9


@dataclass(frozen=True)
class DgpSpec:
    """The simulated population: covariate Bernoulli probabilities and the
    logistic exposure coefficients (intercept separate, zero by default)."""

    covariate_probs: tuple = (0.6, 0.4, 0.4, 0.5, 0.4, 0.5)
    coefficients: tuple = (3.0, 1.1, 2.2, -1.7, -4.8, -3.7)
    intercept: float = 0.0

    def __post_init__(self) -> None:
        probs = tuple(float(q) for q in self.covariate_probs)
        coefs = tuple(float(b) for b in self.coefficients)
        if len(probs) != len(coefs):
            raise ValueError("covariate_probs and coefficients must have equal length")
        if any(not (0.0 < q < 1.0) for q in probs):
            raise ValueError("covariate probabilities must lie in (0, 1)")
        object.__setattr__(self, "covariate_probs", probs)
        object.__setattr__(self, "coefficients", coefs)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_probs)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream: (base_seed, stream_index) -> Generator.

    Distinct stream indices give statistically independent streams (numpy
    SeedSequence), so replications can run in parallel without coordination.
    """

    base_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([int(self.base_seed), int(self.stream_index)])
        return np.random.Generator(np.random.PCG64(seq))


def true_propensity(x: np.ndarray, spec: DgpSpec = DgpSpec()):
    """Exposure probability of covariate pattern(s) ``x`` under the population model.

    ``x`` may be a single length-p 0/1 vector or an (m, p) matrix of them.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isin(arr, (0.0, 1.0))):
        raise ValueError("covariate patterns must have entries in {0, 1}")
    lin = arr @ np.asarray(spec.coefficients) + spec.intercept
    return inverse_logit(lin)


def enumerate_patterns(spec: DgpSpec = DgpSpec()):
    """All 2^p covariate patterns with their population masses and propensities.

    Returns
    -------
    patterns : ndarray, shape (2^p, p)
    masses : ndarray, shape (2^p,)
        Product-Bernoulli probabilities; sums to 1 exactly.
    propensities : ndarray, shape (2^p,)
    """
    p = spec.n_covariates
    patterns = np.array(list(product((0.0, 1.0), repeat=p)))
    q = np.asarray(spec.covariate_probs)
    masses = np.prod(np.where(patterns == 1.0, q, 1.0 - q), axis=1)
    return patterns, masses, true_propensity(patterns, spec)


def marginal_exposure_probability(spec: DgpSpec = DgpSpec()) -> float:
    """Exact population exposure probability by enumeration over all patterns."""
    _, masses, props = enumerate_patterns(spec)
    return float(np.sum(masses * props))


def draw_population_subject(rng: RngStream | np.random.Generator, spec: DgpSpec = DgpSpec()):
    """One random-sample subject: (covariates, exposure, true propensity)."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    q = np.asarray(spec.covariate_probs)
    x = (gen.random(spec.n_covariates) < q).astype(float)
    p = true_propensity(x, spec)
    e = int(gen.random() < p)
    return x, e, p


def _draw_block(gen: np.random.Generator, n: int, spec: DgpSpec):
    q = np.asarray(spec.covariate_probs)
    X = (gen.random((n, spec.n_covariates)) < q).astype(float)
    p = true_propensity(X, spec)
    e = (gen.random(n) < p).astype(np.int8)
    return X, e, p


def sample_random_cohort(
    N: int, rng: RngStream | np.random.Generator, spec: DgpSpec = DgpSpec()
) -> Cohort:
    """A size-N random sample from the population (no conditioning on exposure)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    X, e, p = _draw_block(gen, N, spec)
    return Cohort(
        covariates=X,
        exposure=e,
        design=RandomSample(n_rows=N),
        true_propensity=p,
    )


def sample_conditional_cohort(
    n_exposed: int,
    controls_per_case: float,
    rng: RngStream | np.random.Generator,
    spec: DgpSpec = DgpSpec(),
) -> Cohort:
    """A conditional-on-exposure cohort via rejection sampling.

    Population subjects are drawn until ``n_exposed`` exposed and
    ``round(n_exposed * controls_per_case)`` control rows are collected;
    surplus draws of a filled class are discarded. Rows are assembled as
    the exposed block followed by the control block, then shuffled with
    the same stream. True propensities travel with the cohort.
    """
    if n_exposed < 1:
        raise ValueError(f"n_exposed must be >= 1, got {n_exposed}")
    if not (controls_per_case > 0):
        raise ValueError(f"controls_per_case must be positive, got {controls_per_case}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    design = ConditionalOnExposure(n_exposed=n_exposed, controls_per_case=controls_per_case)
    n_controls = design.n_controls

    w = marginal_exposure_probability(spec)
    # expected draws to fill the slower class, with headroom
    target = max(n_exposed / w, n_controls / (1.0 - w))
    chunk = max(64, int(1.3 * target))

    kept_X = {1: [], 0: []}
    kept_p = {1: [], 0: []}
    have = {1: 0, 0: 0}
    need = {1: n_exposed, 0: n_controls}
    drawn = 0
    while have[1] < need[1] or have[0] < need[0]:
        if drawn >= _DRAW_GUARD:
            raise RuntimeError(
                f"conditional sampling did not terminate within {_DRAW_GUARD} draws"
            )
        m = min(chunk, _DRAW_GUARD - drawn)
        X, e, p = _draw_block(gen, m, spec)
        drawn += m
        for cls in (1, 0):
            if have[cls] < need[cls]:
                idx = np.flatnonzero(e == cls)[: need[cls] - have[cls]]
                if idx.size:
                    kept_X[cls].append(X[idx])
                    kept_p[cls].append(p[idx])
                    have[cls] += idx.size
        chunk = max(64, chunk // 2)

    X = np.vstack(kept_X[1] + kept_X[0])
    p = np.concatenate(kept_p[1] + kept_p[0])
    e = np.concatenate([np.ones(n_exposed, dtype=np.int8), np.zeros(n_controls, dtype=np.int8)])
    order = gen.permutation(n_exposed + n_controls)
    return Cohort(
        covariates=X[order],
        exposure=e[order],
        design=design,
        true_propensity=p[order],
    )
