"""Per-rating reliability weights from user and item rating centrality.

A rating close to its user's (or item's) mean score is considered
central, hence reliable.  Centrality is the capped reciprocal of the
absolute deviation from the mean; the user-side and item-side values are
multiplied and squashed through a monotone normalization, giving a
weight in (1, 2] for ``tanh``/``sigmoid`` and (1, 1 + r_max^2] for
``identity``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RatingDataset

NORMALIZATIONS = ("tanh", "sigmoid", "identity")

#: Denominator guard; keeps the reciprocal finite when a rating equals
#: the mean.  Small enough that the r_max cap engages first.
DEFAULT_DELTA = 1e-6


def _check_kind(kind: str) -> None:
    if kind not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {kind!r}; expected one of {NORMALIZATIONS}")


def user_means(train: RatingDataset) -> np.ndarray:
    """Mean training rating per user; NaN for users with no ratings."""
    counts = np.bincount(train.users, minlength=train.num_users)
    sums = np.bincount(train.users, weights=train.ratings, minlength=train.num_users)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def item_means(train: RatingDataset) -> np.ndarray:
    """Mean training rating per item; NaN for items with no ratings."""
    counts = np.bincount(train.items, minlength=train.num_items)
    sums = np.bincount(train.items, weights=train.ratings, minlength=train.num_items)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def rating_centrality(rating, mean, r_max: float, delta: float = DEFAULT_DELTA):
    """Capped reciprocal deviation ``min(1 / (|rating - mean| + delta), r_max)``.

    Accepts scalars or arrays; ``delta`` must be positive.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    dev = np.abs(np.asarray(rating, dtype=np.float64) - np.asarray(mean, dtype=np.float64))
    out = np.minimum(1.0 / (dev + delta), r_max)
    return float(out) if out.ndim == 0 else out


def user_centrality(rating, user_mean, r_max: float, delta: float = DEFAULT_DELTA):
    """Centrality of a rating relative to the user's mean score."""
    return rating_centrality(rating, user_mean, r_max, delta)


def item_centrality(rating, item_mean, r_max: float, delta: float = DEFAULT_DELTA):
    """Centrality of a rating relative to the item's mean score."""
    return rating_centrality(rating, item_mean, r_max, delta)


def combine(w_user, w_item, kind: str = "tanh"):
    """Reliability weight ``1 + f(w_user * w_item)`` for a monotone f.

    ``kind`` selects f: ``tanh``, ``sigmoid`` (logistic ``1/(1+e^-t)``)
    or ``identity``.  The added 1 keeps every weight strictly positive
    even where f is tiny.
    """
    _check_kind(kind)
    t = np.asarray(w_user, dtype=np.float64) * np.asarray(w_item, dtype=np.float64)
    if kind == "tanh":
        out = 1.0 + np.tanh(t)
    elif kind == "sigmoid":
        out = 1.0 + 1.0 / (1.0 + np.exp(-t))
    else:
        out = 1.0 + t
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReliabilityWeights:
    """Per-rating reliability weights plus per-entity averages.

    ``weights[t]`` aligns with triple ``t`` of the training dataset the
    weights were built from.  ``user_avg_weight`` / ``item_avg_weight``
    are the means of ``weights`` over each entity's training triples and
    act as per-entity regularization multipliers; entities with no
    training ratings get the neutral value 1.  ``user_mean`` /
    ``item_mean`` are NaN for such entities.
    """

    weights: np.ndarray
    user_avg_weight: np.ndarray
    item_avg_weight: np.ndarray
    user_mean: np.ndarray
    item_mean: np.ndarray
    kind: str
    delta: float

    def __post_init__(self):
        for name in ("weights", "user_avg_weight", "item_avg_weight",
                     "user_mean", "item_mean"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def unit(cls, train: RatingDataset) -> "ReliabilityWeights":
        """All-ones weights; reduces weighted training to its unweighted
        counterpart."""
        return cls(np.ones(len(train)), np.ones(train.num_users),
                   np.ones(train.num_items), user_means(train), item_means(train),
                   "identity", DEFAULT_DELTA)


def build_weights(train: RatingDataset, kind: str = "tanh",
                  delta: float = DEFAULT_DELTA) -> ReliabilityWeights:
    """Compute reliability weights for every training triple.

    Uses the training split only: user and item means, centralities and
    averages never see held-out ratings.

    Raises:
        ValueError: empty training set or bad ``kind``/``delta``.
    """
    _check_kind(kind)
    if len(train) == 0:
        raise ValueError("cannot build weights from an empty training set")
    if delta <= 0:
        raise ValueError("delta must be positive")

    u_mean = user_means(train)
    i_mean = item_means(train)
    r_max = train.rating_max
    w_user = rating_centrality(train.ratings, u_mean[train.users], r_max, delta)
    w_item = rating_centrality(train.ratings, i_mean[train.items], r_max, delta)
    w = combine(w_user, w_item, kind)

    user_counts = np.bincount(train.users, minlength=train.num_users)
    item_counts = np.bincount(train.items, minlength=train.num_items)
    user_avg = np.where(
        user_counts > 0,
        np.bincount(train.users, weights=w, minlength=train.num_users)
        / np.maximum(user_counts, 1),
        1.0)
    item_avg = np.where(
        item_counts > 0,
        np.bincount(train.items, weights=w, minlength=train.num_items)
        / np.maximum(item_counts, 1),
        1.0)
    return ReliabilityWeights(weights=w, user_avg_weight=user_avg,
                              item_avg_weight=item_avg, user_mean=u_mean,
                              item_mean=i_mean, kind=kind, delta=delta)


def write_weight_dump(train: RatingDataset, rw: ReliabilityWeights, path) -> None:
    """Audit CSV ``user,item,w_user,w_item,w`` for every training triple."""
    r_max = train.rating_max
    w_user = rating_centrality(train.ratings, rw.user_mean[train.users], r_max, rw.delta)
    w_item = rating_centrality(train.ratings, rw.item_mean[train.items], r_max, rw.delta)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("user,item,w_user,w_item,w\n")
        for u, i, wu, wi, w in zip(train.users, train.items, w_user, w_item, rw.weights):
            fh.write(f"{u},{i},{repr(float(wu))},{repr(float(wi))},{repr(float(w))}\n")
