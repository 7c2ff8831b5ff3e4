"""How per-rating reliability weights are computed.

Run from the repository root:  python demos/02_reliability_weights.py
"""

import numpy as np

from mfrc import (build_weights, combine, item_centrality, user_centrality,
                  user_means)
from mfrc.data import RatingDataset

# ---------------------------------------------------------------------------
# Centrality is the capped reciprocal of the deviation from a mean score.
# A rating sitting on its user's mean hits the cap (r_max); a rating four
# stars away gets 1/4.
# ---------------------------------------------------------------------------
r_max = 5.0
for rating, mean in [(4.0, 4.0), (5.0, 4.0), (1.0, 5.0)]:
    c = user_centrality(rating, mean, r_max)
    print(f"rating {rating} vs user mean {mean}: centrality {c:.6f}")

# The item side is the same formula against the item's mean.
print("item side:", item_centrality(5.0, 2.5, r_max))

# ---------------------------------------------------------------------------
# User and item centralities multiply, then a monotone squashing turns
# the product into a weight.  tanh and sigmoid keep weights in (1, 2];
# identity lets them grow up to 1 + r_max^2.
# ---------------------------------------------------------------------------
for kind in ("tanh", "sigmoid", "identity"):
    print(f"combine(1.0, 0.5, {kind}) = {combine(1.0, 0.5, kind):.6f}")

# ---------------------------------------------------------------------------
# On a dataset the whole computation is one call.  Two users rate item 0
# with the same score, but user 1 is a habitual five-star rater, so that
# five is more central for them and earns a larger weight.
# ---------------------------------------------------------------------------
ds = RatingDataset.from_arrays(
    users=[0, 0, 0, 1, 1, 1],
    items=[0, 1, 2, 0, 1, 2],
    ratings=[5.0, 1.0, 2.0, 5.0, 5.0, 4.0],
    num_users=2, num_items=3)
rw = build_weights(ds, kind="tanh")
print("\nuser means:", user_means(ds))
for t, (u, i, r) in enumerate(ds):
    print(f"user {u} item {i} rating {r}: weight {rw.weights[t]:.4f}")
print("per-user average weights:", np.round(rw.user_avg_weight, 4))
print("per-item average weights:", np.round(rw.item_avg_weight, 4))

# The averages drive regularization strength during training: entities
# whose ratings look reliable get pulled toward the origin a bit harder,
# entities with no training ratings keep the neutral multiplier 1.
