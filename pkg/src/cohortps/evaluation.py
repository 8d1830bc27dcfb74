"""Replication-level evaluation: bias, MSE, relative efficiency, and the
grid-sweep experiment harness with disjoint seeded replication streams."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .learners import derive_seed
from .losses import LossFunction
from .simulate import (
    DgpSpec,
    enumerate_patterns,
    sample_conditional_cohort,
    sample_random_cohort,
)
from .stacking import fit_super_learner
from .weights import compute_observation_weights, uniform_weights

WEIGHTED_TRUE_W = "WeightedTrueW"
WEIGHTED_W_MINUS = "WeightedWMinus"
WEIGHTED_W_PLUS = "WeightedWPlus"
UNWEIGHTED = "Unweighted"
RANDOM_SAMPLE_BASELINE = "RandomSampleBaseline"

VARIANT_LABELS = (
    WEIGHTED_TRUE_W,
    WEIGHTED_W_MINUS,
    WEIGHTED_W_PLUS,
    UNWEIGHTED,
    RANDOM_SAMPLE_BASELINE,
)
_WEIGHTED_LABELS = (WEIGHTED_TRUE_W, WEIGHTED_W_MINUS, WEIGHTED_W_PLUS)


@dataclass(frozen=True)
class EstimatorVariant:
    """One estimator configuration in the comparison: a label plus the
    exposure probability it weights with (None for unweighted variants)."""

    label: str
    w_used: float | None = None

    def __post_init__(self) -> None:
        if self.label not in VARIANT_LABELS:
            raise ValueError(f"unknown variant label {self.label!r}")
        weighted = self.label in _WEIGHTED_LABELS
        if weighted and self.w_used is None:
            raise ValueError(f"{self.label} requires w_used")
        if not weighted and self.w_used is not None:
            raise ValueError(f"{self.label} must not carry w_used")
        if self.w_used is not None and not (0.0 < self.w_used < 1.0):
            raise ValueError(f"w_used must lie in (0, 1), got {self.w_used}")

    @property
    def is_weighted(self) -> bool:
        return self.label in _WEIGHTED_LABELS


def perturbed_w(w: float, error: float) -> tuple[float, float]:
    """(w-, w+): the relative-error-perturbed exposure probabilities,
    rounded to two decimals (0.33 and 0.41 for w=0.37 at 10%)."""
    return round(w * (1.0 - error), 2), round(w * (1.0 + error), 2)


def standard_variants(w: float = 0.37, error: float = 0.10) -> list[EstimatorVariant]:
    """The five estimator variants of the comparison study."""
    w_minus, w_plus = perturbed_w(w, error)
    return [
        EstimatorVariant(WEIGHTED_TRUE_W, w),
        EstimatorVariant(WEIGHTED_W_MINUS, w_minus),
        EstimatorVariant(WEIGHTED_W_PLUS, w_plus),
        EstimatorVariant(UNWEIGHTED),
        EstimatorVariant(RANDOM_SAMPLE_BASELINE),
    ]


def pointwise_bias(true_p: np.ndarray, est_p: np.ndarray) -> np.ndarray:
    """Elementwise |true - estimated|; summarize with the mean,
    percent bias is 100 times that mean (probability points)."""
    t = np.asarray(true_p, dtype=float)
    e = np.asarray(est_p, dtype=float)
    if t.shape != e.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {e.shape}")
    for name, arr in (("true_p", t), ("est_p", e)):
        if np.any(arr < 0) or np.any(arr > 1):
            raise ValueError(f"{name} entries must lie in [0, 1]")
    return np.abs(t - e)


def pointwise_mse(true_p: np.ndarray, est_p: np.ndarray) -> np.ndarray:
    """Elementwise squared differences; summarize with the mean."""
    return pointwise_bias(true_p, est_p) ** 2


def relative_efficiency(mse_unweighted: float, mse_weighted: float) -> float:
    """MSE of the unweighted estimator over MSE of the weighted one."""
    if not (mse_weighted > 0.0):
        raise ValueError(f"weighted MSE must be strictly positive, got {mse_weighted}")
    if not (mse_unweighted > 0.0):
        raise ValueError(f"unweighted MSE must be strictly positive, got {mse_unweighted}")
    return float(mse_unweighted) / float(mse_weighted)


@dataclass(frozen=True)
class ReplicationConfig:
    variant: EstimatorVariant
    n_exposed: int
    controls_per_case: float
    seed: int
    library: tuple
    k: int = 10
    loss: LossFunction = LossFunction()
    evaluation_mode: str = "insample"
    dgp: DgpSpec = DgpSpec()
    replication_index: int = 0

    def __post_init__(self) -> None:
        if self.evaluation_mode not in ("insample", "population"):
            raise ValueError(f"unknown evaluation_mode {self.evaluation_mode!r}")
        object.__setattr__(self, "library", tuple(self.library))


@dataclass(frozen=True)
class ReplicationRecord:
    variant: EstimatorVariant
    n_exposed: int
    controls_per_case: float
    replication_index: int
    seed: int
    mean_abs_bias: float
    mean_mse: float
    alpha: tuple
    learner_names: tuple

    def __post_init__(self) -> None:
        if not (0.0 <= self.mean_abs_bias <= 1.0):
            raise ValueError(f"mean_abs_bias out of [0, 1]: {self.mean_abs_bias}")
        if not (0.0 <= self.mean_mse <= 1.0):
            raise ValueError(f"mean_mse out of [0, 1]: {self.mean_mse}")
        # Jensen: the mean square dominates the squared mean
        if self.mean_mse + 1e-12 < self.mean_abs_bias**2:
            raise ValueError(
                f"mean_mse={self.mean_mse} violates Jensen bound "
                f"(mean_abs_bias={self.mean_abs_bias})"
            )


def run_replication(config: ReplicationConfig) -> ReplicationRecord:
    """One replication: sample a cohort, weight it per the variant, fit the
    super learner, and score against the generation-time propensities."""
    variant = config.variant
    gen = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([int(config.seed), 2]))
    )
    if variant.label == RANDOM_SAMPLE_BASELINE:
        N = config.n_exposed + int(round(config.n_exposed * config.controls_per_case))
        cohort = sample_random_cohort(N, gen, config.dgp)
    else:
        cohort = sample_conditional_cohort(
            config.n_exposed, config.controls_per_case, gen, config.dgp
        )

    if variant.is_weighted:
        weights = compute_observation_weights(cohort, variant.w_used, normalize=True)
    else:
        weights = uniform_weights(cohort)

    library = [
        spec.with_seed(derive_seed(config.seed, 1000 + i, spec.seed))
        for i, spec in enumerate(config.library)
    ]
    fit = fit_super_learner(
        cohort,
        weights,
        library,
        k=config.k,
        loss=config.loss,
        seed=derive_seed(config.seed, 1),
    )

    if config.evaluation_mode == "insample":
        est = fit.predict(cohort.covariates)
        bias = pointwise_bias(cohort.true_propensity, np.clip(est, 0.0, 1.0))
        mean_abs_bias = float(np.mean(bias))
        mean_mse = float(np.mean(bias**2))
    else:
        patterns, masses, props = enumerate_patterns(config.dgp)
        est = np.clip(fit.predict(patterns), 0.0, 1.0)
        diff = np.abs(props - est)
        mean_abs_bias = float(np.sum(masses * diff))
        mean_mse = float(np.sum(masses * diff**2))

    return ReplicationRecord(
        variant=variant,
        n_exposed=config.n_exposed,
        controls_per_case=config.controls_per_case,
        replication_index=config.replication_index,
        seed=config.seed,
        mean_abs_bias=mean_abs_bias,
        mean_mse=mean_mse,
        alpha=tuple(float(a) for a in fit.alpha),
        learner_names=fit.learner_names,
    )


@dataclass(frozen=True)
class ExperimentGrid:
    """The sweep: exposed counts x controls-per-case x estimator variants,
    R seeded replications per cell."""

    n_list: tuple
    C_list: tuple
    variants: tuple
    replications: int
    base_seed: int
    library: tuple
    k: int = 10
    loss: LossFunction = LossFunction()
    evaluation_mode: str = "insample"
    dgp: DgpSpec = DgpSpec()

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "C_list", tuple(float(C) for C in self.C_list))
        object.__setattr__(self, "variants", tuple(self.variants))
        object.__setattr__(self, "library", tuple(self.library))

    def replication_configs(self) -> list[ReplicationConfig]:
        configs = []
        for variant in self.variants:
            vcode = VARIANT_LABELS.index(variant.label)
            for n in self.n_list:
                for C in self.C_list:
                    for rep in range(self.replications):
                        seed = derive_seed(
                            self.base_seed, vcode, n, int(round(C * 1e6)), rep
                        )
                        configs.append(
                            ReplicationConfig(
                                variant=variant,
                                n_exposed=n,
                                controls_per_case=C,
                                seed=seed,
                                library=self.library,
                                k=self.k,
                                loss=self.loss,
                                evaluation_mode=self.evaluation_mode,
                                dgp=self.dgp,
                                replication_index=rep,
                            )
                        )
        return configs


@dataclass(frozen=True)
class CellSummary:
    variant: str
    n_exposed: int
    controls_per_case: float
    replications: int
    pct_bias: float
    mse: float
    rel_eff: float | None
    complete: bool


@dataclass(frozen=True)
class ExperimentReport:
    """All replication records plus per-cell aggregates. Summaries are a
    pure function of the records, so a report can be re-derived exactly
    from a persisted record set."""

    records: tuple
    summaries: tuple
    failures: tuple = ()


def _record_sort_key(r: ReplicationRecord):
    return (
        VARIANT_LABELS.index(r.variant.label),
        r.n_exposed,
        r.controls_per_case,
        r.replication_index,
    )


def aggregate_cell_rows(rows, expected_replications: int | None = None) -> tuple:
    """Aggregate (label, n, C, rep, mean_abs_bias, mean_mse) rows into
    :class:`CellSummary` tuples. This is the single source of truth for the
    report math, shared by in-memory reports and persisted-record reloads."""
    rows = sorted(rows, key=lambda r: (VARIANT_LABELS.index(r[0]), r[1], r[2], r[3]))
    cells: dict = {}
    for label, n, C, rep, bias, mse in rows:
        cells.setdefault((label, n, C), []).append((bias, mse))

    mse_unweighted = {
        (n, C): float(np.mean([q[1] for q in rs]))
        for (label, n, C), rs in cells.items()
        if label == UNWEIGHTED
    }
    summaries = []
    for (label, n, C), rs in cells.items():
        pct_bias = 100.0 * float(np.mean([q[0] for q in rs]))
        mse = float(np.mean([q[1] for q in rs]))
        rel_eff = None
        if label in _WEIGHTED_LABELS and (n, C) in mse_unweighted and mse > 0.0:
            rel_eff = relative_efficiency(mse_unweighted[(n, C)], mse)
        summaries.append(
            CellSummary(
                variant=label,
                n_exposed=n,
                controls_per_case=C,
                replications=len(rs),
                pct_bias=pct_bias,
                mse=mse,
                rel_eff=rel_eff,
                complete=(
                    expected_replications is None or len(rs) == expected_replications
                ),
            )
        )
    return tuple(summaries)


def aggregate_records(
    records: list[ReplicationRecord],
    expected_replications: int | None = None,
) -> tuple:
    """Per-(variant, n, C) aggregates: percent bias, MSE, and relative
    efficiency of each weighted variant against the matching Unweighted
    cell; cells with fewer records than expected are marked incomplete."""
    rows = [
        (
            r.variant.label,
            r.n_exposed,
            r.controls_per_case,
            r.replication_index,
            r.mean_abs_bias,
            r.mean_mse,
        )
        for r in records
    ]
    return aggregate_cell_rows(rows, expected_replications)


def _run_job(config: ReplicationConfig):
    try:
        return ("ok", run_replication(config))
    except Exception as exc:  # noqa: BLE001 - failures are recorded per cell
        cell = (config.variant.label, config.n_exposed, config.controls_per_case)
        return ("err", cell, config.replication_index, f"{type(exc).__name__}: {exc}")


def run_experiment(grid: ExperimentGrid, jobs: int | None = None) -> ExperimentReport:
    """Execute every replication of the grid (optionally across processes)
    and aggregate. Results are independent of the job count: every
    replication's stream derives from (base_seed, variant, n, C, rep)."""
    configs = grid.replication_configs()
    if jobs is None:
        jobs = os.cpu_count() or 1
    results = []
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_job, configs, chunksize=4))
    else:
        results = [_run_job(c) for c in configs]

    records = [r[1] for r in results if r[0] == "ok"]
    failures = tuple(r[1:] for r in results if r[0] == "err")
    records = sorted(records, key=_record_sort_key)
    summaries = aggregate_records(records, expected_replications=grid.replications)
    return ExperimentReport(records=tuple(records), summaries=summaries, failures=failures)
