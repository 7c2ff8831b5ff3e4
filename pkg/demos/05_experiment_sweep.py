"""A small end-to-end sweep: split, train, evaluate, aggregate, pivot.

Run from the repository root:  python demos/05_experiment_sweep.py

The same sweep is available from the command line:

    mfrc experiment --config spec.json --out sweep/
    mfrc report --rows sweep/results.csv --out-dir sweep/report/
"""

import tempfile
from pathlib import Path

import numpy as np

from mfrc import ExperimentSpec, run_experiment
from mfrc.data import RatingDataset, write_interchange
from mfrc.experiments import write_report, write_rows_csv

workdir = Path(tempfile.mkdtemp(prefix="mfrc_demo_"))

rng = np.random.default_rng(11)
cells = rng.choice(60 * 90, size=2400, replace=False)
users, items = cells // 90, cells % 90
u_eff = rng.normal(0, 0.7, 60)
i_eff = rng.normal(0, 0.7, 90)
ratings = np.clip(np.round(3 + u_eff[users] + i_eff[items] + rng.normal(0, 0.5, cells.size)), 1, 5)
ds = RatingDataset.from_arrays(users, items, ratings, num_users=60, num_items=90)
data_csv = workdir / "ratings.csv"
write_interchange(ds, data_csv)

# ---------------------------------------------------------------------------
# A sweep is a declarative spec: which models, which latent sizes, which
# training ratios, how many seeded repeats.  Repeat r re-splits the data
# with base_seed + r, so every cell is reproducible in isolation.
# ---------------------------------------------------------------------------
spec = ExperimentSpec(
    dataset=str(data_csv), format="interchange",
    models=["plain_mf", "biased_mf", "alswr", "mfrc"],
    k_values=[6], alpha_values=[0.6, 0.8], norms=["tanh"],
    repeats=3, base_seed=0, epochs=30, lam=0.05, eta=0.01,
    hyper={"alswr": {"epochs": 10}})

rows, aggregates, failures = run_experiment(spec, log=print)
print(f"\n{len(rows)} result rows, {len(failures)} failures")

write_rows_csv(rows, workdir / "results.csv")
for agg in aggregates:
    fcp = f"{agg.mean_fcp:.4f}" if agg.mean_fcp is not None else "-"
    print(f"  {agg.model:>10} alpha={agg.alpha}: "
          f"mean rmse {agg.mean_rmse:.4f}, mean fcp {fcp} over {agg.repeats} repeats")

# ---------------------------------------------------------------------------
# Pivots reshape the rows into one table per metric (alpha rows, model
# columns here, since alpha varies).
# ---------------------------------------------------------------------------
for path in write_report(rows, workdir / "report"):
    print(f"\n{path.name}:")
    print(path.read_text().strip())
