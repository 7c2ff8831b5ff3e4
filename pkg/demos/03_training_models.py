"""Training the four model kinds and inspecting their traces.

Run from the repository root:  python demos/03_training_models.py
"""

import tempfile
from pathlib import Path

import numpy as np

from mfrc import (ReliabilityWeights, TrainConfig, build_weights, load_model,
                  save_model, split, train_alswr, train_biased_mf, train_mfrc,
                  train_plain_mf)
from mfrc.data import RatingDataset

rng = np.random.default_rng(42)
num_users, num_items = 80, 120
cells = rng.choice(num_users * num_items, size=3000, replace=False)
users, items = cells // num_items, cells % num_items
u_eff = rng.normal(0, 0.7, num_users)
i_eff = rng.normal(0, 0.7, num_items)
ratings = np.clip(np.round(3 + u_eff[users] + i_eff[items] + rng.normal(0, 0.5, cells.size)), 1, 5)
ds = RatingDataset.from_arrays(users, items, ratings,
                               num_users=num_users, num_items=num_items)
pair = split(ds, 0.8, seed=1)

cfg = TrainConfig(k=8, epochs=60, lam=0.05, eta=0.01, seed=1)

# ---------------------------------------------------------------------------
# The weighted model needs reliability weights built from the same
# training split; everything else trains straight from the data.
# ---------------------------------------------------------------------------
weights = build_weights(pair.train, kind="tanh")
runs = {
    "mfrc": train_mfrc(pair.train, weights, cfg),
    "biased_mf": train_biased_mf(pair.train, cfg),
    "plain_mf": train_plain_mf(pair.train, cfg),
    "alswr": train_alswr(pair.train, TrainConfig(k=8, epochs=15, lam=0.05, seed=1)),
}
for name, (model, trace) in runs.items():
    print(f"{name:>10}: objective {trace.objective[0]:10.1f} -> {trace.objective[-1]:8.1f}   "
          f"train rmse {trace.train_rmse[0]:.3f} -> {trace.train_rmse[-1]:.3f}")

# ---------------------------------------------------------------------------
# Biased MF is exactly the weighted trainer with every weight forced to
# one; the parameters come out bit-identical.
# ---------------------------------------------------------------------------
unit, _ = train_mfrc(pair.train, ReliabilityWeights.unit(pair.train), cfg)
assert np.array_equal(unit.user_factors, runs["biased_mf"][0].user_factors)
print("\nunit-weight run reproduces biased MF bit-for-bit")

# ---------------------------------------------------------------------------
# Prediction clips to the rating scale and falls back to the training
# global mean for cold users/items.
# ---------------------------------------------------------------------------
model = runs["mfrc"][0]
print("prediction for a trained pair:", round(model.predict(0, 0), 3))
value, is_fallback = model.predict_with_flag(10_000, 0)
print(f"out-of-range user: {value:.3f} (fallback={is_fallback})")

# Snapshots round-trip losslessly through JSON.
path = Path(tempfile.mkdtemp(prefix="mfrc_demo_")) / "model.json"
save_model(model, path)
restored = load_model(path)
assert np.array_equal(restored.user_factors, model.user_factors)
print(f"snapshot round trip OK ({path})")
