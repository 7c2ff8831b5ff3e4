"""Scoring models with RMSE and the fraction of concordant pairs.

Run from the repository root:  python demos/04_evaluation.py
"""

import numpy as np

from mfrc import TrainConfig, evaluate, fcp, rmse, split, train_biased_mf
from mfrc.data import RatingDataset

# ---------------------------------------------------------------------------
# The metrics stand alone.  RMSE is the usual root mean squared error;
# FCP asks, per user, how many test-item pairs the model orders the same
# way the true ratings do.  Pairs with equal true ratings are skipped,
# and a predicted tie on an ordered pair counts against the model.
# ---------------------------------------------------------------------------
print("rmse:", rmse([(4.0, 3.5), (2.0, 2.5)]))

per_user = {0: [(5.0, 4.0), (3.0, 4.5), (1.0, 2.0)]}
value, concordant, discordant, skipped = fcp(per_user)
print(f"fcp: {value:.4f} ({concordant} concordant, {discordant} discordant, "
      f"{skipped} skipped)")

# ---------------------------------------------------------------------------
# evaluate() wires both metrics to a trained model and a held-out split,
# counting cold-start fallbacks instead of skipping them.
# ---------------------------------------------------------------------------
rng = np.random.default_rng(3)
cells = rng.choice(50 * 70, size=1500, replace=False)
users, items = cells // 70, cells % 70
u_eff = rng.normal(0, 0.8, 50)
i_eff = rng.normal(0, 0.8, 70)
ratings = np.clip(np.round(3 + u_eff[users] + i_eff[items] + rng.normal(0, 0.5, cells.size)), 1, 5)
ds = RatingDataset.from_arrays(users, items, ratings, num_users=50, num_items=70)

pair = split(ds, 0.8, seed=9)
model, _ = train_biased_mf(pair.train, TrainConfig(k=6, epochs=40, eta=0.01, seed=9))
report = evaluate(model, pair.test)
print(f"\nheld-out: rmse={report.rmse:.4f} fcp={report.fcp:.4f} "
      f"({report.concordant}/{report.concordant + report.discordant} pairs concordant, "
      f"{report.skipped_pairs} skipped)")
print(f"test size {report.test_size}, fallback predictions {report.fallback_predictions}")

# A constant predictor has a defined RMSE but ranks nothing: every
# countable pair is discordant.
lazy = model
lazy.user_factors[:] = 0.0
lazy.item_factors[:] = 0.0
lazy.user_bias[:] = 0.0
lazy.item_bias[:] = 0.0
report = evaluate(lazy, pair.test)
print(f"\nconstant predictor: rmse={report.rmse:.4f} "
      f"concordant={report.concordant} discordant={report.discordant}")
