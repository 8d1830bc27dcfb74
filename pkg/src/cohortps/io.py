"""CSV and manifest I/O with fixed, documented schemas.

Records CSV:  variant, n, C, rep, seed, mean_abs_bias, mean_mse, alpha_1..alpha_L
Report CSV:   variant, n, C, reps, pct_bias, mse, rel_eff
Cohort CSV:   covariate columns, one 0/1 exposure column, optionally a
              true_propensity column (simulation exports only).

All files are UTF-8, comma-delimited, with a mandatory header row. Floats
are written with the shortest representation that round-trips, so a rerun
with the same manifest produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .cohort import Cohort
from .evaluation import aggregate_cell_rows

TRUE_PROPENSITY_COLUMN = "true_propensity"

RECORD_FIXED_COLUMNS = ["variant", "n", "C", "rep", "seed", "mean_abs_bias", "mean_mse"]
REPORT_COLUMNS = ["variant", "n", "C", "reps", "pct_bias", "mse", "rel_eff"]


class CohortFileError(ValueError):
    """A cohort CSV violated the schema; the message carries row/column detail."""


def records_frame(records) -> pd.DataFrame:
    """Replication records as a DataFrame in the fixed column order."""
    if not records:
        return pd.DataFrame(columns=RECORD_FIXED_COLUMNS)
    n_alpha = len(records[0].alpha)
    rows = []
    for r in records:
        if len(r.alpha) != n_alpha:
            raise ValueError("all records in one file must share the same library size")
        row = {
            "variant": r.variant.label,
            "n": r.n_exposed,
            "C": r.controls_per_case,
            "rep": r.replication_index,
            "seed": r.seed,
            "mean_abs_bias": r.mean_abs_bias,
            "mean_mse": r.mean_mse,
        }
        for i, a in enumerate(r.alpha, start=1):
            row[f"alpha_{i}"] = a
        rows.append(row)
    cols = RECORD_FIXED_COLUMNS + [f"alpha_{i}" for i in range(1, n_alpha + 1)]
    return pd.DataFrame(rows, columns=cols)


def report_frame(summaries) -> pd.DataFrame:
    """Cell summaries as a DataFrame in the fixed column order."""
    rows = [
        {
            "variant": s.variant,
            "n": s.n_exposed,
            "C": s.controls_per_case,
            "reps": s.replications,
            "pct_bias": s.pct_bias,
            "mse": s.mse,
            "rel_eff": "" if s.rel_eff is None else s.rel_eff,
        }
        for s in summaries
    ]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_frame(df: pd.DataFrame, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False)


def report_frame_from_records_csv(path) -> pd.DataFrame:
    """Recompute the report from a persisted records CSV (bit-identical to
    the report written alongside it)."""
    df = pd.read_csv(path, float_precision="round_trip")
    rows = [
        (r.variant, int(r.n), float(r.C), int(r.rep), float(r.mean_abs_bias), float(r.mean_mse))
        for r in df.itertuples(index=False)
    ]
    return report_frame(aggregate_cell_rows(rows))


def write_manifest(path, payload: dict) -> None:
    payload = {"version": __version__, **payload}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cohort_to_csv(cohort: Cohort, path, include_true_propensity: bool = False) -> None:
    """Serialize a cohort; covariates become x1..xp, exposure keeps its name."""
    data = {f"x{j + 1}": cohort.covariates[:, j] for j in range(cohort.n_covariates)}
    data["exposure"] = cohort.exposure.astype(int)
    if include_true_propensity:
        if cohort.true_propensity is None:
            raise ValueError("cohort carries no true propensities to export")
        data[TRUE_PROPENSITY_COLUMN] = cohort.true_propensity
    write_frame(pd.DataFrame(data), path)


def read_cohort_csv(path, exposure_column: str = "exposure") -> dict:
    """Parse and validate a cohort CSV.

    Returns a dict with ``covariates`` (N x p float matrix), ``exposure``
    (0/1 int vector), ``covariate_columns`` (names, file order),
    ``true_propensity`` (vector or None). Schema violations raise
    :class:`CohortFileError` with row/column diagnostics.
    """
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise CohortFileError(f"cohort file not found: {path}") from None
    except Exception as exc:
        raise CohortFileError(f"could not parse {path}: {exc}") from exc
    if df.shape[0] == 0:
        raise CohortFileError(f"{path}: no data rows")
    if exposure_column not in df.columns:
        raise CohortFileError(
            f"{path}: exposure column '{exposure_column}' not found "
            f"(columns: {', '.join(df.columns)})"
        )

    exposure_raw = df[exposure_column]
    if exposure_raw.isna().any():
        bad = int(exposure_raw.isna().idxmax())
        raise CohortFileError(
            f"{path}: missing value in exposure column '{exposure_column}' at data row {bad}"
        )
    values = pd.to_numeric(exposure_raw, errors="coerce")
    non_binary = ~values.isin([0, 1])
    if non_binary.any():
        bad = int(non_binary.idxmax())
        raise CohortFileError(
            f"{path}: exposure column '{exposure_column}' must be 0/1; "
            f"data row {bad} holds {exposure_raw.iloc[bad]!r}"
        )

    true_p = None
    if TRUE_PROPENSITY_COLUMN in df.columns:
        tp = pd.to_numeric(df[TRUE_PROPENSITY_COLUMN], errors="coerce")
        if tp.isna().any():
            bad = int(tp.isna().idxmax())
            raise CohortFileError(
                f"{path}: non-numeric or missing {TRUE_PROPENSITY_COLUMN} at data row {bad}"
            )
        true_p = tp.to_numpy(dtype=float)

    covariate_columns = [
        c for c in df.columns if c not in (exposure_column, TRUE_PROPENSITY_COLUMN)
    ]
    if not covariate_columns:
        raise CohortFileError(f"{path}: no covariate columns besides '{exposure_column}'")
    X = np.empty((df.shape[0], len(covariate_columns)))
    for j, col in enumerate(covariate_columns):
        vals = pd.to_numeric(df[col], errors="coerce")
        if vals.isna().any():
            bad = int(vals.isna().idxmax())
            raise CohortFileError(
                f"{path}: column '{col}' has a missing or non-numeric value "
                f"at data row {bad}"
            )
        X[:, j] = vals.to_numpy(dtype=float)

    return {
        "covariates": X,
        "exposure": values.to_numpy(dtype=np.int8),
        "covariate_columns": covariate_columns,
        "true_propensity": true_p,
    }
