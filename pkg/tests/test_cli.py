import numpy as np
import pandas as pd
import pytest

from cohortps import (
    Cohort,
    ConditionalOnExposure,
    LossFunction,
    RngStream,
    fit_super_learner,
    sample_conditional_cohort,
)
from cohortps.cli import PLOTDATA_COLUMNS, build_parser, fit_cohort_file, main
from cohortps.config import build_library
from cohortps.io import cohort_to_csv, read_cohort_csv
from cohortps.learners import derive_seed
from cohortps.weights import compute_observation_weights

TINY_CONFIG = """
[grid]
n = 30
c = 1
replications = 2
base_seed = 12345

[stacking]
folds = 3

[library]
learners = logistic
"""


@pytest.fixture()
def cohort_csv(tmp_path):
    cohort = sample_conditional_cohort(40, 1.0, RngStream(21, 3))
    path = tmp_path / "cohort.csv"
    cohort_to_csv(cohort, path)
    return path


class TestSimulate:
    def test_writes_outputs_and_is_rerun_identical(self, tmp_path):
        config = tmp_path / "run.ini"
        config.write_text(TINY_CONFIG)
        out1 = tmp_path / "out1"
        out2 = tmp_path / "out2"
        assert main(["simulate", "--config", str(config), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(config), "--out", str(out2)]) == 0
        records1 = (out1 / "records.csv").read_bytes()
        records2 = (out2 / "records.csv").read_bytes()
        assert records1 == records2
        assert (out1 / "report.csv").exists() and (out1 / "manifest.json").exists()
        df = pd.read_csv(out1 / "records.csv")
        assert len(df) == 10  # 5 variants x 2 replications

    def test_profile_flag_sets_grid(self, tmp_path):
        # desk profile grid shape, shrunk by nothing; just verify a dry parse
        parser = build_parser()
        args = parser.parse_args(["simulate", "--profile", "desk", "--out", str(tmp_path)])
        assert args.profile == "desk"

    def test_invalid_config_nonzero_exit(self, tmp_path, capsys):
        config = tmp_path / "run.ini"
        config.write_text("[grid]\nwrong = 1\n")
        code = main(["simulate", "--config", str(config), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "wrong" in capsys.readouterr().err

    def test_config_and_profile_conflict(self, tmp_path, capsys):
        config = tmp_path / "run.ini"
        config.write_text(TINY_CONFIG)
        code = main(
            ["simulate", "--config", str(config), "--profile", "desk",
             "--out", str(tmp_path / "o")]
        )
        assert code == 2

    def test_records_reproducible_from_manifest_alone(self, tmp_path):
        import json

        config = tmp_path / "run.ini"
        config.write_text(TINY_CONFIG)
        out1 = tmp_path / "out1"
        assert main(["simulate", "--config", str(config), "--out", str(out1)]) == 0
        manifest = json.loads((out1 / "manifest.json").read_text())

        # the manifest's config echo is itself a valid JSON config
        replay_config = tmp_path / "replay.json"
        replay_config.write_text(json.dumps(manifest["config"]))
        out2 = tmp_path / "out2"
        assert main(["simulate", "--config", str(replay_config), "--out", str(out2)]) == 0
        assert (out1 / "records.csv").read_bytes() == (out2 / "records.csv").read_bytes()
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()


class TestFit:
    def test_round_trip_matches_in_process_fit(self, tmp_path, cohort_csv):
        out = tmp_path / "preds.csv"
        code = main(
            ["fit", "--data", str(cohort_csv), "--w", "0.37", "--library", "reduced",
             "--folds", "4", "--seed", "11", "--out", str(out)]
        )
        assert code == 0
        df = pd.read_csv(out)
        assert list(df.columns) == ["row", "prediction"]

        # independent reconstruction of the pipeline
        parsed = read_cohort_csv(cohort_csv)
        X, e = parsed["covariates"], parsed["exposure"]
        order = np.lexsort(tuple([e] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]))
        cohort = Cohort(
            covariates=X[order],
            exposure=e[order],
            design=ConditionalOnExposure(int(np.sum(e == 1)), float(np.sum(e == 0) / np.sum(e == 1))),
        )
        weights = compute_observation_weights(cohort, 0.37, normalize=True)
        fit = fit_super_learner(
            cohort, weights, build_library(("reduced",), base_seed=11),
            k=4, loss=LossFunction(), seed=derive_seed(11, 0xF17),
        )
        expected = fit.predict(X)
        np.testing.assert_allclose(df["prediction"].to_numpy(), expected, atol=1e-12)

    def test_row_order_invariance(self, tmp_path, cohort_csv):
        df = pd.read_csv(cohort_csv)
        perm = np.random.default_rng(0).permutation(len(df))
        shuffled_path = tmp_path / "shuffled.csv"
        df.iloc[perm].to_csv(shuffled_path, index=False)

        preds_a, _, _ = fit_cohort_file(
            cohort_csv, w=0.37, folds=4, seed=11, library_names=("reduced",)
        )
        preds_b, _, _ = fit_cohort_file(
            shuffled_path, w=0.37, folds=4, seed=11, library_names=("reduced",)
        )
        np.testing.assert_allclose(preds_b, preds_a[perm], atol=0)

    def test_missing_exposure_column_names_it(self, tmp_path, capsys):
        path = tmp_path / "c.csv"
        path.write_text("x1,treated\n1,0\n0,1\n")
        code = main(["fit", "--data", str(path), "--w", "0.3", "--out", str(tmp_path / "p.csv")])
        assert code == 2
        assert "'exposure'" in capsys.readouterr().err

    def test_manifest_records_auto_c_and_alpha(self, tmp_path, cohort_csv):
        import json

        out = tmp_path / "preds.csv"
        main(
            ["fit", "--data", str(cohort_csv), "--w", "0.19", "--library", "logistic",
             "--folds", "4", "--seed", "1", "--out", str(out)]
        )
        manifest = json.loads((tmp_path / "preds.csv.manifest.json").read_text())
        assert manifest["controls_per_case"] == 1.0
        assert manifest["w"] == 0.19
        assert manifest["alpha"] == [1.0]
        assert "cv_loss_ensemble" in manifest

    def test_explicit_c_must_match_counts(self, tmp_path, cohort_csv, capsys):
        code = main(
            ["fit", "--data", str(cohort_csv), "--w", "0.3", "--controls-per-case", "2",
             "--out", str(tmp_path / "p.csv")]
        )
        assert code == 2
        assert "controls" in capsys.readouterr().err

    def test_external_cv_adds_honest_loss(self, tmp_path, cohort_csv):
        import json

        out = tmp_path / "preds.csv"
        code = main(
            ["fit", "--data", str(cohort_csv), "--w", "0.37", "--library", "logistic",
             "--folds", "3", "--external-cv-folds", "3", "--seed", "2", "--out", str(out)]
        )
        assert code == 0
        manifest = json.loads((tmp_path / "preds.csv.manifest.json").read_text())
        assert manifest["external_cv_loss"] > 0
        assert len(manifest["external_cv_fold_losses"]) == 3


class TestPlotdata:
    def _report(self, tmp_path):
        report = tmp_path / "report.csv"
        report.write_text(
            "variant,n,C,reps,pct_bias,mse,rel_eff\n"
            "WeightedTrueW,200,1.0,100,0.8,0.0004,5.2\n"
            "WeightedTrueW,1000,1.0,100,0.4,0.0001,9.0\n"
            "WeightedTrueW,200,2.0,100,0.7,0.0003,1.5\n"
            "Unweighted,200,1.0,100,6.0,0.005,\n"
        )
        return report

    def test_bias_figure_one_row_per_cell(self, tmp_path):
        out = tmp_path / "bias.csv"
        assert main(["plotdata", "--report", str(self._report(tmp_path)),
                     "--figure", "bias", "--out", str(out)]) == 0
        df = pd.read_csv(out)
        assert list(df.columns) == PLOTDATA_COLUMNS
        assert len(df) == 4
        row = df[(df.variant == "WeightedTrueW") & (df.n == 200) & (df.C == 1.0)].iloc[0]
        assert row.N == 400 and row.value == pytest.approx(0.8)

    def test_releff_one_series_per_c(self, tmp_path):
        out = tmp_path / "releff.csv"
        main(["plotdata", "--report", str(self._report(tmp_path)),
              "--figure", "releff", "--out", str(out)])
        df = pd.read_csv(out)
        assert set(df.series) == {"C=1", "C=2"}
        assert len(df) == 3  # only the true-w weighted rows carry rel_eff

    def test_empty_report_header_only(self, tmp_path):
        report = tmp_path / "empty.csv"
        report.write_text("variant,n,C,reps,pct_bias,mse,rel_eff\n")
        out = tmp_path / "o.csv"
        assert main(["plotdata", "--report", str(report), "--figure", "mse",
                     "--out", str(out)]) == 0
        assert out.read_text().strip() == ",".join(PLOTDATA_COLUMNS)

    def test_malformed_report_rejected(self, tmp_path, capsys):
        report = tmp_path / "bad.csv"
        report.write_text("a,b\n1,2\n")
        assert main(["plotdata", "--report", str(report), "--figure", "bias",
                     "--out", str(tmp_path / "o.csv")]) == 2


class TestEnvOverrides:
    def test_env_supplies_flag_defaults(self, monkeypatch):
        monkeypatch.setenv("COHORTPS_FOLDS", "7")
        monkeypatch.setenv("COHORTPS_W", "0.25")
        parser = build_parser()
        args = parser.parse_args(["fit", "--data", "d.csv", "--out", "o.csv"])
        assert args.folds == "7"
        assert args.w == "0.25"

    def test_explicit_flag_beats_env(self, monkeypatch):
        monkeypatch.setenv("COHORTPS_FOLDS", "7")
        parser = build_parser()
        args = parser.parse_args(
            ["fit", "--data", "d.csv", "--w", "0.3", "--folds", "4", "--out", "o.csv"]
        )
        assert args.folds == "4"
