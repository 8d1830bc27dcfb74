import numpy as np
import pandas as pd
import pytest

from cohortps import EstimatorVariant, RngStream, sample_conditional_cohort
from cohortps.evaluation import UNWEIGHTED, WEIGHTED_TRUE_W, ReplicationRecord, aggregate_records
from cohortps.io import (
    RECORD_FIXED_COLUMNS,
    REPORT_COLUMNS,
    CohortFileError,
    cohort_to_csv,
    read_cohort_csv,
    records_frame,
    report_frame,
    report_frame_from_records_csv,
    write_frame,
    write_manifest,
)


def _records():
    out = []
    for label, w_used, n, C, rep, bias, mse in [
        (WEIGHTED_TRUE_W, 0.37, 50, 1.0, 0, 0.02, 0.001),
        (WEIGHTED_TRUE_W, 0.37, 50, 1.0, 1, 0.03, 0.002),
        (UNWEIGHTED, None, 50, 1.0, 0, 0.06, 0.005),
        (UNWEIGHTED, None, 50, 1.0, 1, 0.08, 0.009),
    ]:
        out.append(
            ReplicationRecord(
                variant=EstimatorVariant(label, w_used),
                n_exposed=n,
                controls_per_case=C,
                replication_index=rep,
                seed=1000 + rep,
                mean_abs_bias=bias,
                mean_mse=mse,
                alpha=(0.7, 0.3),
                learner_names=("logistic", "lasso"),
            )
        )
    return out


class TestRecordAndReportFrames:
    def test_record_schema(self):
        df = records_frame(_records())
        assert list(df.columns) == RECORD_FIXED_COLUMNS + ["alpha_1", "alpha_2"]
        assert df.shape == (4, 9)

    def test_report_schema_and_blank_rel_eff(self):
        summaries = aggregate_records(_records())
        df = report_frame(summaries)
        assert list(df.columns) == REPORT_COLUMNS
        weighted = df[df.variant == WEIGHTED_TRUE_W].iloc[0]
        # rel_eff = mean unweighted MSE / mean weighted MSE
        assert float(weighted.rel_eff) == pytest.approx(0.007 / 0.0015)
        unweighted = df[df.variant == UNWEIGHTED].iloc[0]
        assert unweighted.rel_eff == ""

    def test_report_recomputed_from_records_csv_is_identical(self, tmp_path):
        records = _records()
        rec_path = tmp_path / "records.csv"
        rep_path = tmp_path / "report.csv"
        write_frame(records_frame(records), rec_path)
        write_frame(report_frame(aggregate_records(records)), rep_path)
        recomputed = report_frame_from_records_csv(rec_path)
        recomputed_path = tmp_path / "report2.csv"
        write_frame(recomputed, recomputed_path)
        assert rep_path.read_bytes() == recomputed_path.read_bytes()


class TestCohortCsv:
    def test_round_trip_exact(self, tmp_path):
        cohort = sample_conditional_cohort(25, 1.0, RngStream(5, 0))
        path = tmp_path / "cohort.csv"
        cohort_to_csv(cohort, path, include_true_propensity=True)
        parsed = read_cohort_csv(path)
        np.testing.assert_array_equal(parsed["covariates"], cohort.covariates)
        np.testing.assert_array_equal(parsed["exposure"], cohort.exposure)
        np.testing.assert_array_equal(parsed["true_propensity"], cohort.true_propensity)
        assert parsed["covariate_columns"] == [f"x{j}" for j in range(1, 7)]

    def test_missing_exposure_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(CohortFileError, match="'exposure'"):
            read_cohort_csv(path)

    def test_non_binary_exposure_row_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,exposure\n0.5,0\n0.1,2\n")
        with pytest.raises(CohortFileError, match="data row 1"):
            read_cohort_csv(path)

    def test_missing_covariate_value_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2,exposure\n1.0,2.0,0\n1.5,,1\n")
        with pytest.raises(CohortFileError, match="'x2'"):
            read_cohort_csv(path)

    def test_non_numeric_covariate_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,exposure\nred,0\n1.0,1\n")
        with pytest.raises(CohortFileError, match="'x1'"):
            read_cohort_csv(path)

    def test_custom_exposure_column(self, tmp_path):
        path = tmp_path / "ok.csv"
        path.write_text("age,treated\n30,0\n40,1\n")
        parsed = read_cohort_csv(path, exposure_column="treated")
        np.testing.assert_array_equal(parsed["exposure"], [0, 1])
        assert parsed["covariate_columns"] == ["age"]

    def test_export_without_truth_rejected_when_requested(self, tmp_path):
        from tests.conftest import cohort_from_arrays

        cohort = cohort_from_arrays(np.zeros((4, 1)), np.array([0, 1, 0, 1]))
        with pytest.raises(ValueError, match="no true propensities"):
            cohort_to_csv(cohort, tmp_path / "c.csv", include_true_propensity=True)


def test_manifest_contains_version(tmp_path):
    import json

    path = tmp_path / "manifest.json"
    write_manifest(path, {"command": "simulate", "config": {"a": 1}})
    payload = json.loads(path.read_text())
    assert payload["version"] and payload["command"] == "simulate"
