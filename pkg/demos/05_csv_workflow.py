"""The external-data workflow: export a cohort to CSV, fit it back through
the command-line interface, and read the predictions and manifest.

This mirrors analyzing a real oversampled cohort where the source
population's exposure probability is known from registry or census data:
only the CSV, the exposure column name, and w are needed.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import pandas as pd

from cohortps import RngStream, sample_conditional_cohort
from cohortps.io import cohort_to_csv

workdir = Path(tempfile.mkdtemp(prefix="cohortps_demo_"))
cohort_path = workdir / "cohort.csv"
preds_path = workdir / "predictions.csv"

cohort = sample_conditional_cohort(500, 2.0, RngStream(base_seed=5, stream_index=0))
cohort_to_csv(cohort, cohort_path)
print(f"wrote {cohort.n_rows}-row cohort to {cohort_path}", flush=True)

cmd = [
    sys.executable, "-m", "cohortps.cli",
    "fit",
    "--data", str(cohort_path),
    "--exposure-col", "exposure",
    "--w", "0.37",
    "--controls-per-case", "auto",
    "--library", "reduced",
    "--folds", "10",
    "--seed", "7",
    "--external-cv-folds", "5",
    "--out", str(preds_path),
]
print("\n$", " ".join(cmd[2:]), flush=True)
subprocess.run(cmd, check=True)

preds = pd.read_csv(preds_path)
manifest = json.loads((workdir / "predictions.csv.manifest.json").read_text())
print(f"\npredictions: {len(preds)} rows, range "
      f"[{preds.prediction.min():.3f}, {preds.prediction.max():.3f}]")
print("alpha:", dict(zip(manifest["library"], [round(a, 3) for a in manifest["alpha"]])))
print("cross-validated ensemble loss:", round(manifest["cv_loss_ensemble"], 4))
print("external CV loss:", round(manifest["external_cv_loss"], 4))
