# %% [markdown]
# # Why the fused score anti-correlates with performance
#
# Reads a finished `reproduce` run and splits scores and performance by
# predicted criticality. Run `python -m predeval reproduce --seed 7 --out
# runs/reproduce-7` first (about six minutes on one core), or point RUN
# at another run directory.

# %%
from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

RUN = Path(os.environ.get("RUN", "runs/reproduce-7"))

with open(RUN / "evaluation.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
print(len(rows), "rows")

# %% [markdown]
# Within one predictor, split on p_c > 0.5. Critical scenes get scores
# near their normalized GAD (nonnegative). Simple scenes get scores near
# the negated normalized error (nonpositive). Critical scenes also drive
# worse for every predictor, so pooled r comes out negative even when the
# within-group relation is flat.

# %%
for pid in sorted({r["predictor_id"] for r in rows}):
    g = [r for r in rows if r["predictor_id"] == pid]
    pc = np.array([float(r["p_critical"]) for r in g])
    score = np.array([float(r["score"]) for r in g])
    overall = np.array([float(r["overall"]) for r in g])
    crit = pc > 0.5
    print(f"{pid:>24s}  n_crit {crit.sum():3d}  "
          f"score crit/simple {score[crit].mean():+.3f}/{score[~crit].mean():+.3f}  "
          f"overall crit/simple {overall[crit].mean():+.3f}/{overall[~crit].mean():+.3f}  "
          f"pooled r {np.corrcoef(score, overall)[0, 1]:+.3f}")

# %% [markdown]
# The same split for -ADE: negated error carries no criticality offset,
# which is why it keeps a positive pooled correlation.

# %%
with open(RUN / "metrics.csv", newline="") as fh:
    ade = {(r["scenario_id"], r["predictor_id"]): float(r["ADE"]) for r in csv.DictReader(fh)}
for pid in sorted({r["predictor_id"] for r in rows}):
    g = [r for r in rows if r["predictor_id"] == pid]
    neg = np.array([-ade[(r["scenario_id"], pid)] for r in g])
    overall = np.array([float(r["overall"]) for r in g])
    print(f"{pid:>24s}  r(-ADE, overall) {np.corrcoef(neg, overall)[0, 1]:+.3f}")
