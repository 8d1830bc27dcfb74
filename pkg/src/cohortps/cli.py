"""Command-line interface: simulate, fit, plotdata.

Every flag can also be supplied through an environment variable named
COHORTPS_<FLAG> with dashes as underscores (e.g. COHORTPS_JOBS=4,
COHORTPS_EXPOSURE_COL=treated); explicit flags win over the environment.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .cohort import Cohort, ConditionalOnExposure
from .config import ConfigError, ExperimentConfig, build_library, load_config, profile_config
from .evaluation import WEIGHTED_TRUE_W, run_experiment
from .io import (
    REPORT_COLUMNS,
    CohortFileError,
    read_cohort_csv,
    records_frame,
    report_frame,
    write_frame,
    write_manifest,
)
from .learners import derive_seed
from .losses import LossFunction, LossKind
from .stacking import external_cv_super_learner, fit_super_learner
from .weights import compute_observation_weights

PLOTDATA_COLUMNS = ["figure", "series", "variant", "C", "n", "N", "value"]
_LOSSES = {"nll": LossKind.NEG_LOG_LIKELIHOOD, "squared": LossKind.SQUARED_ERROR}


def _env(name: str):
    return os.environ.get(f"COHORTPS_{name.upper().replace('-', '_')}")


def _add(parser: argparse.ArgumentParser, flag: str, **kwargs):
    env_val = _env(flag.lstrip("-"))
    if env_val is not None:
        kwargs["default"] = env_val
    parser.add_argument(flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortps",
        description=(
            "Propensity score estimation for cohorts with oversampled exposed "
            "subjects: simulation sweeps, CSV cohort fitting, and plot-ready "
            "report reshaping."
        ),
    )
    parser.add_argument("--version", action="version", version=f"cohortps {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a replication sweep and write record/report CSVs")
    _add(sim, "--config", default=None, help="INI or JSON config file")
    _add(sim, "--profile", default=None, choices=["desk", "paper"],
         help="built-in grid profile (default: desk when no --config)")
    _add(sim, "--library", default=None,
         help="full | reduced | comma-separated learner names")
    _add(sim, "--jobs", default=None, help="parallel replication processes (0 = all cores)")
    _add(sim, "--seed", default=None, help="base seed override")
    _add(sim, "--folds", default=None, help="cross-validation folds")
    _add(sim, "--loss", default=None, choices=list(_LOSSES), help="meta-learner loss")
    _add(sim, "--w", default=None, help="source-population exposure probability")
    _add(sim, "--evaluation-mode", default=None, choices=["insample", "population"])
    _add(sim, "--out", default=None, help="output directory")

    fit = sub.add_parser("fit", help="fit the stacked estimator to a cohort CSV")
    _add(fit, "--data", required=_env("data") is None, help="cohort CSV path")
    _add(fit, "--exposure-col", default="exposure", help="name of the 0/1 exposure column")
    _add(fit, "--w", required=_env("w") is None,
         help="source-population exposure probability in (0, 1)")
    _add(fit, "--controls-per-case", default="auto",
         help="nominal C, or 'auto' for (control count)/(exposed count)")
    _add(fit, "--folds", default="10")
    _add(fit, "--seed", default="0")
    _add(fit, "--library", default="full")
    _add(fit, "--loss", default="nll", choices=list(_LOSSES))
    _add(fit, "--external-cv-folds", default="0",
         help="when > 1, also cross-validate the whole procedure for an honest loss")
    _add(fit, "--out", required=_env("out") is None, help="predictions CSV path")

    plot = sub.add_parser("plotdata", help="reshape a report CSV into tidy plot series")
    _add(plot, "--report", required=_env("report") is None, help="report CSV path")
    _add(plot, "--figure", required=_env("figure") is None,
         choices=["bias", "mse", "releff"])
    _add(plot, "--out", required=_env("out") is None, help="tidy CSV output path")
    return parser


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.library is not None:
        updates["learners"] = tuple(s.strip() for s in str(args.library).split(","))
    if args.jobs is not None:
        updates["jobs"] = int(args.jobs)
    if args.seed is not None:
        updates["base_seed"] = int(args.seed)
    if args.folds is not None:
        updates["folds"] = int(args.folds)
    if args.loss is not None:
        updates["loss_name"] = str(args.loss)
    if args.w is not None:
        updates["w"] = float(args.w)
    if args.evaluation_mode is not None:
        updates["evaluation_mode"] = str(args.evaluation_mode)
    if args.out is not None:
        updates["output_directory"] = str(args.out)
    return replace(config, **updates)


def cmd_simulate(args) -> int:
    try:
        if args.config is not None:
            config = load_config(args.config)
            if args.profile is not None:
                raise ConfigError("--config and --profile are mutually exclusive")
        else:
            config = profile_config(args.profile or "desk")
        config = _apply_overrides(config, args)
        grid = config.grid()
    except (ConfigError, ValueError) as exc:
        print(f"cohortps simulate: {exc}", file=sys.stderr)
        return 2

    jobs = config.jobs if config.jobs > 0 else (os.cpu_count() or 1)
    report = run_experiment(grid, jobs=jobs)

    out = Path(config.output_directory)
    write_frame(records_frame(report.records), out / "records.csv")
    write_frame(report_frame(report.summaries), out / "report.csv")
    write_manifest(
        out / "manifest.json",
        {
            "command": "simulate",
            "config": config.to_dict(),
            "learners": [s.name for s in grid.library],
            "records_csv": "records.csv",
            "report_csv": "report.csv",
            "failures": [list(f) for f in report.failures],
        },
    )
    if report.failures:
        for cell, rep, msg in report.failures:
            print(f"cohortps simulate: cell {cell} rep {rep} failed: {msg}", file=sys.stderr)
        print(
            f"cohortps simulate: {len(report.failures)} replication(s) failed; "
            f"partial outputs kept in {out}",
            file=sys.stderr,
        )
        return 1
    print(f"wrote {len(report.records)} records to {out}")
    return 0


def fit_cohort_file(
    data_path,
    exposure_column: str = "exposure",
    w: float = 0.37,
    controls_per_case: str | float = "auto",
    folds: int = 10,
    seed: int = 0,
    library_names: tuple = ("full",),
    loss: LossFunction = LossFunction(),
    external_cv_folds: int = 0,
):
    """The cmd_fit pipeline as a callable: returns (predictions, fit, manifest).

    Rows are sorted canonically (lexicographically by covariates, then
    exposure) before fold assignment, so the fitted ensemble - and therefore
    every prediction - is invariant to the input row order.
    """
    parsed = read_cohort_csv(data_path, exposure_column)
    X, e = parsed["covariates"], parsed["exposure"]
    n_exposed = int(np.sum(e == 1))
    n_controls = int(np.sum(e == 0))
    if n_exposed == 0 or n_controls == 0:
        raise CohortFileError(
            f"{data_path}: exposure column '{exposure_column}' must contain both classes"
        )
    if isinstance(controls_per_case, str) and controls_per_case == "auto":
        C = n_controls / n_exposed
    else:
        C = float(controls_per_case)
        if int(round(n_exposed * C)) != n_controls:
            raise CohortFileError(
                f"{data_path}: C={C} implies {int(round(n_exposed * C))} controls "
                f"but the file has {n_controls}; use --controls-per-case auto"
            )

    order = np.lexsort(tuple([e] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]))
    cohort = Cohort(
        covariates=X[order],
        exposure=e[order],
        design=ConditionalOnExposure(n_exposed=n_exposed, controls_per_case=C),
        ids=np.asarray(order),
    )
    weights = compute_observation_weights(cohort, w=float(w), normalize=True)
    library = build_library(library_names, base_seed=int(seed))
    fit = fit_super_learner(
        cohort, weights, library, k=int(folds), loss=loss, seed=derive_seed(int(seed), 0xF17)
    )
    predictions = fit.predict(X)  # original row order

    manifest = {
        "command": "fit",
        "data": str(data_path),
        "exposure_column": exposure_column,
        "w": float(w),
        "controls_per_case": C,
        "n_exposed": n_exposed,
        "n_controls": n_controls,
        "folds": int(folds),
        "seed": int(seed),
        "library": [s.name for s in library],
        "loss": loss.kind.value,
        "alpha": [float(a) for a in fit.alpha],
        "cv_loss_by_learner": fit.diagnostics["cv_loss_by_learner"],
        "cv_loss_ensemble": fit.diagnostics["cv_loss_ensemble"],
    }
    if int(external_cv_folds) > 1:
        ext = external_cv_super_learner(
            cohort,
            weights,
            library,
            k_outer=int(external_cv_folds),
            k_inner=int(folds),
            loss=loss,
            seed=derive_seed(int(seed), 0xEC7),
        )
        manifest["external_cv_loss"] = loss.mean_loss(
            ext.oof_predictions, cohort.exposure.astype(float), weights.values
        )
        manifest["external_cv_fold_losses"] = [float(x) for x in ext.fold_losses]
    return predictions, fit, manifest


def cmd_fit(args) -> int:
    try:
        w = float(args.w)
        predictions, _fit, manifest = fit_cohort_file(
            args.data,
            exposure_column=args.exposure_col,
            w=w,
            controls_per_case=args.controls_per_case,
            folds=int(args.folds),
            seed=int(args.seed),
            library_names=tuple(s.strip() for s in str(args.library).split(",")),
            loss=LossFunction(kind=_LOSSES[args.loss]),
            external_cv_folds=int(args.external_cv_folds),
        )
    except (CohortFileError, ConfigError, ValueError) as exc:
        print(f"cohortps fit: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    write_frame(
        pd.DataFrame({"row": np.arange(predictions.size), "prediction": predictions}),
        out,
    )
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), manifest)
    print(f"wrote {predictions.size} predictions to {out}")
    return 0


def cmd_plotdata(args) -> int:
    try:
        df = pd.read_csv(args.report)
    except FileNotFoundError:
        print(f"cohortps plotdata: report not found: {args.report}", file=sys.stderr)
        return 2
    except Exception as exc:  # malformed CSV
        print(f"cohortps plotdata: cannot parse {args.report}: {exc}", file=sys.stderr)
        return 2
    missing = [c for c in REPORT_COLUMNS if c not in df.columns]
    if missing:
        print(
            f"cohortps plotdata: {args.report} lacks report columns {missing}",
            file=sys.stderr,
        )
        return 2

    rows = []
    for r in df.itertuples(index=False):
        n = int(r.n)
        C = float(r.C)
        N = n + int(round(n * C))
        if args.figure == "bias":
            value = float(r.pct_bias)
        elif args.figure == "mse":
            value = float(r.mse)
        else:
            if r.variant != WEIGHTED_TRUE_W or pd.isna(r.rel_eff):
                continue
            value = float(r.rel_eff)
        series = f"C={C:g}" if args.figure == "releff" else f"{r.variant} (C={C:g})"
        rows.append(
            {
                "figure": args.figure,
                "series": series,
                "variant": r.variant,
                "C": C,
                "n": n,
                "N": N,
                "value": value,
            }
        )
    write_frame(pd.DataFrame(rows, columns=PLOTDATA_COLUMNS), args.out)
    print(f"wrote {len(rows)} plot rows to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "fit":
        return cmd_fit(args)
    return cmd_plotdata(args)


if __name__ == "__main__":
    sys.exit(main())
