"""
From CSV files to saved models
==============================

Write a benchmark to the standard CSV layouts, then drive the command-line
entry point: cross-validate, fit one model, and predict with it.
"""

import csv
import tempfile
from pathlib import Path

from rfa.cli import main

work = Path(tempfile.mkdtemp(prefix="rfa-demo-"))
spec = work / "spec.toml"
spec.write_text("[synthetic]\nn_instances = 200\nn_language_features = 60\n")

# %%
# ``synth`` writes long-format language tables, a wide factor table, the
# outcome, word counts, the planted coefficients and a ready-made run.toml.
main(["synth", "--config", str(spec), "--out", str(work / "data")])
print(sorted(p.name for p in (work / "data").iterdir()))

# %%
# Tighten the reduction for this small dataset, then cross-validate.
run = work / "data" / "run.toml"
run.write_text(run.read_text() + "\n[preprocessing]\nn_components = 15\n")
main(["run", "--config", str(run), "--out", str(work / "cv"), "--families", "controls,rc,rfa"])

# %%
# Fit on every row, save, and predict from the saved file.
main(["fit", "--config", str(run), "--out", str(work / "model"), "--families", "rfa"])
main(["predict", "--model", str(work / "model" / "model.json"), "--config", str(run),
      "--out", str(work / "pred")])
with open(work / "pred" / "predictions.csv") as fh:
    rows = list(csv.reader(fh))
print(rows[:3])
print("outputs under", work)
