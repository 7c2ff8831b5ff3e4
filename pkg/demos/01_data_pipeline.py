"""Loading rating data, splitting it, and round-tripping the CSV format.

Run from the repository root:  python demos/01_data_pipeline.py
"""

import tempfile
from pathlib import Path

import numpy as np

from mfrc import (RatingDataset, global_mean, ingest, read_interchange,
                  sparsity, split, write_interchange)

workdir = Path(tempfile.mkdtemp(prefix="mfrc_demo_"))

# ---------------------------------------------------------------------------
# MovieLens-format files are plain text, one rating per line.  Here is a
# tiny hand-written file in the 100k layout (tab-separated, trailing
# timestamp is parsed then dropped).
# ---------------------------------------------------------------------------
raw = workdir / "u.data"
raw.write_text(
    "1\t1\t5\t874965758\n"
    "1\t2\t3\t876893171\n"
    "2\t1\t4\t878542960\n"
    "3\t2\t1\t876893119\n"
)
ds = ingest(raw, "ml-100k")
print(f"ingested: {ds.num_users} users x {ds.num_items} items, {len(ds)} ratings")
print(f"sparsity: {sparsity(ds):.3f}   global mean: {global_mean(ds):.3f}")
print("triples:", list(ds))

# External ids are 1-based in MovieLens files; internally everything is
# dense and 0-based so ids can index factor matrices directly.
print("external id of internal user 0:", ds.user_ids[0])

# ---------------------------------------------------------------------------
# Larger synthetic data, written and read back through the canonical
# interchange CSV (user,item,rating with internal ids).  The round trip
# is bit-exact because ratings serialize with repr().
# ---------------------------------------------------------------------------
rng = np.random.default_rng(7)
cells = rng.choice(60 * 80, size=1200, replace=False)
ratings = np.clip(np.round(rng.normal(3.4, 1.1, cells.size)), 1, 5)
big = RatingDataset.from_arrays(cells // 80, cells % 80, ratings,
                                num_users=60, num_items=80)
csv_path = workdir / "ratings.csv"
write_interchange(big, csv_path)
back = read_interchange(csv_path)
assert np.array_equal(back.ratings, big.ratings)
print(f"\ninterchange round trip exact for {len(back)} ratings")

# ---------------------------------------------------------------------------
# Seeded splitting: same seed, same partition; the halves are disjoint
# and inherit the source dimensions (users missing from train become
# cold-start cases downstream).
# ---------------------------------------------------------------------------
pair = split(big, ratio=0.8, seed=13)
again = split(big, ratio=0.8, seed=13)
assert np.array_equal(pair.train.users, again.train.users)
print(f"split: {len(pair.train)} train / {len(pair.test)} test "
      f"(ratio {pair.ratio}, seed {pair.seed})")

cold_users = int((pair.train.user_counts() == 0).sum())
print(f"users with no training ratings: {cold_users}")
print(f"\nartifacts in {workdir}")
