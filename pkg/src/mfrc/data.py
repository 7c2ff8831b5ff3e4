"""Rating data ingestion, immutable sparse storage, and train/test splitting.

Supports the two classic MovieLens file layouts plus a plain CSV
interchange format (``user,item,rating`` with 0-based internal ids).
External MovieLens ids are positive integers; they are remapped to dense
0-based internal ids (``internal = external - 1``) so factor matrices can
be indexed directly.  Matrix dimensions are sized by the largest external
id seen, so ids that never occur in the ratings file still own a (empty)
row or column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

FORMATS = ("ml-100k", "ml-1m")

_SEPARATORS = {"ml-100k": "\t", "ml-1m": "::"}


class DatasetError(ValueError):
    """Base class for rating-data validation failures."""


class MalformedLineError(DatasetError):
    """A line in a rating file could not be parsed."""

    def __init__(self, path, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class RatingScaleError(DatasetError):
    """A rating value falls outside the declared scale."""


class DuplicateRatingError(DatasetError):
    """The same (user, item) pair appears more than once."""


class RatingTriple(NamedTuple):
    user: int
    item: int
    rating: float


@dataclass(frozen=True)
class RatingDataset:
    """Immutable sparse collection of (user, item, rating) triples.

    Arrays are parallel: ``users[t], items[t], ratings[t]`` form triple t.
    ``user_ids`` / ``item_ids`` map internal ids back to external ones
    (``user_ids[internal] == external``).  All arrays are marked
    read-only, so a dataset may be shared freely across threads.
    """

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    num_users: int
    num_items: int
    rating_min: float
    rating_max: float
    user_ids: np.ndarray
    item_ids: np.ndarray
    _user_order: np.ndarray = field(repr=False, default=None)
    _user_starts: np.ndarray = field(repr=False, default=None)
    _item_order: np.ndarray = field(repr=False, default=None)
    _item_starts: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        users = np.ascontiguousarray(self.users, dtype=np.int64)
        items = np.ascontiguousarray(self.items, dtype=np.int64)
        ratings = np.ascontiguousarray(self.ratings, dtype=np.float64)
        if not (len(users) == len(items) == len(ratings)):
            raise DatasetError("users, items and ratings must have equal length")
        if self.num_users <= 0 or self.num_items <= 0:
            raise DatasetError("num_users and num_items must be positive")
        if len(users) and (users.min() < 0 or users.max() >= self.num_users):
            raise DatasetError("user id out of range [0, num_users)")
        if len(items) and (items.min() < 0 or items.max() >= self.num_items):
            raise DatasetError("item id out of range [0, num_items)")
        if len(ratings):
            lo, hi = float(ratings.min()), float(ratings.max())
            if lo < self.rating_min or hi > self.rating_max:
                raise RatingScaleError(
                    f"rating outside scale [{self.rating_min}, {self.rating_max}]"
                )
        keys = users * self.num_items + items
        if len(np.unique(keys)) != len(keys):
            raise DuplicateRatingError("duplicate (user, item) pair in dataset")

        user_ids = np.ascontiguousarray(self.user_ids, dtype=np.int64)
        item_ids = np.ascontiguousarray(self.item_ids, dtype=np.int64)
        if len(user_ids) != self.num_users or len(item_ids) != self.num_items:
            raise DatasetError("id maps must cover every internal id")
        if len(np.unique(user_ids)) != len(user_ids) or len(np.unique(item_ids)) != len(item_ids):
            raise DatasetError("id maps must be bijective")

        # CSR-style per-entity position index (stable, so bucket order
        # follows triple order).
        user_order = np.argsort(users, kind="stable")
        user_starts = np.zeros(self.num_users + 1, dtype=np.int64)
        np.cumsum(np.bincount(users, minlength=self.num_users), out=user_starts[1:])
        item_order = np.argsort(items, kind="stable")
        item_starts = np.zeros(self.num_items + 1, dtype=np.int64)
        np.cumsum(np.bincount(items, minlength=self.num_items), out=item_starts[1:])

        for arr in (users, items, ratings, user_ids, item_ids,
                    user_order, user_starts, item_order, item_starts):
            arr.flags.writeable = False
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "ratings", ratings)
        object.__setattr__(self, "user_ids", user_ids)
        object.__setattr__(self, "item_ids", item_ids)
        object.__setattr__(self, "_user_order", user_order)
        object.__setattr__(self, "_user_starts", user_starts)
        object.__setattr__(self, "_item_order", item_order)
        object.__setattr__(self, "_item_starts", item_starts)

    @classmethod
    def from_arrays(cls, users, items, ratings, *, num_users=None, num_items=None,
                    rating_min=1.0, rating_max=5.0, user_ids=None, item_ids=None):
        """Build a dataset from parallel arrays of internal ids.

        Dimensions default to ``max id + 1``; id maps default to the
        identity.
        """
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if num_users is None:
            num_users = int(users.max()) + 1 if len(users) else 1
        if num_items is None:
            num_items = int(items.max()) + 1 if len(items) else 1
        if user_ids is None:
            user_ids = np.arange(num_users, dtype=np.int64)
        if item_ids is None:
            item_ids = np.arange(num_items, dtype=np.int64)
        return cls(users, items, np.asarray(ratings, dtype=np.float64),
                   num_users, num_items, float(rating_min), float(rating_max),
                   user_ids, item_ids)

    def __len__(self) -> int:
        return len(self.ratings)

    def __iter__(self) -> Iterator[RatingTriple]:
        for u, i, r in zip(self.users, self.items, self.ratings):
            yield RatingTriple(int(u), int(i), float(r))

    def triple(self, t: int) -> RatingTriple:
        return RatingTriple(int(self.users[t]), int(self.items[t]), float(self.ratings[t]))

    def user_positions(self, u: int) -> np.ndarray:
        """Positions (into the triple arrays) of user ``u``'s ratings."""
        return self._user_order[self._user_starts[u]:self._user_starts[u + 1]]

    def item_positions(self, i: int) -> np.ndarray:
        """Positions (into the triple arrays) of item ``i``'s ratings."""
        return self._item_order[self._item_starts[i]:self._item_starts[i + 1]]

    def user_counts(self) -> np.ndarray:
        return np.diff(self._user_starts)

    def item_counts(self) -> np.ndarray:
        return np.diff(self._item_starts)

    def take(self, positions: np.ndarray) -> "RatingDataset":
        """New dataset holding the given triple positions; dimensions,
        scale and id maps are inherited from this one."""
        positions = np.asarray(positions, dtype=np.int64)
        return RatingDataset(
            self.users[positions], self.items[positions], self.ratings[positions],
            self.num_users, self.num_items, self.rating_min, self.rating_max,
            self.user_ids, self.item_ids)


@dataclass(frozen=True)
class SplitPair:
    """A disjoint train/test partition of a source dataset."""

    train: RatingDataset
    test: RatingDataset
    ratio: float
    seed: int


def ingest(path, fmt: str) -> RatingDataset:
    """Parse a MovieLens rating file into a :class:`RatingDataset`.

    Args:
        path: rating file (``u.data`` style for ml-100k, ``ratings.dat``
            style for ml-1m).
        fmt: one of ``"ml-100k"`` (tab-separated ``user item rating
            timestamp``) or ``"ml-1m"`` (``UserID::MovieID::Rating::
            Timestamp``).

    Timestamps are parsed and discarded.  Both formats declare a 1-5
    star scale.

    Raises:
        OSError: unreadable file.
        MalformedLineError: a line does not match the format (message
            carries the 1-based line number).
        RatingScaleError: rating outside [1, 5].
        DuplicateRatingError: repeated (user, item) pair.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    sep = _SEPARATORS[fmt]
    users, items, ratings = [], [], []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(sep)
            if len(parts) != 4:
                raise MalformedLineError(path, line_no,
                                         f"expected 4 fields separated by {sep!r}, got {len(parts)}")
            try:
                u = int(parts[0])
                i = int(parts[1])
                r = float(parts[2])
                int(parts[3])  # timestamp: validated, then dropped
            except ValueError:
                raise MalformedLineError(path, line_no, f"non-numeric field in {line!r}") from None
            if u < 1 or i < 1:
                raise MalformedLineError(path, line_no, "ids must be positive integers")
            if not 1.0 <= r <= 5.0:
                raise RatingScaleError(f"{path}:{line_no}: rating {r} outside scale [1, 5]")
            users.append(u - 1)
            items.append(i - 1)
            ratings.append(r)
    if not users:
        raise DatasetError(f"{path}: no ratings found")
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    num_users = int(users.max()) + 1
    num_items = int(items.max()) + 1
    return RatingDataset(users, items, np.asarray(ratings), num_users, num_items,
                         1.0, 5.0, np.arange(1, num_users + 1), np.arange(1, num_items + 1))


def write_interchange(ds: RatingDataset, path) -> None:
    """Write the canonical ``user,item,rating`` CSV (internal ids).

    Ratings are serialized with :func:`repr`, which round-trips 64-bit
    floats exactly.
    """
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("user,item,rating\n")
        for u, i, r in zip(ds.users, ds.items, ds.ratings):
            fh.write(f"{u},{i},{repr(float(r))}\n")


def read_interchange(path, rating_min: float = 1.0, rating_max: float = 5.0) -> RatingDataset:
    """Read the canonical ``user,item,rating`` CSV written by
    :func:`write_interchange`.

    Ids are internal (0-based); dimensions are inferred as ``max id + 1``.
    """
    path = Path(path)
    users, items, ratings = [], [], []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["user", "item", "rating"]:
            raise MalformedLineError(path, 1, f"expected header 'user,item,rating', got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedLineError(path, line_no, f"expected 3 fields, got {len(row)}")
            try:
                u, i, r = int(row[0]), int(row[1]), float(row[2])
            except ValueError:
                raise MalformedLineError(path, line_no, f"non-numeric field in {row!r}") from None
            if u < 0 or i < 0:
                raise MalformedLineError(path, line_no, "internal ids must be >= 0")
            users.append(u)
            items.append(i)
            ratings.append(r)
    if not users:
        raise DatasetError(f"{path}: no ratings found")
    return RatingDataset.from_arrays(users, items, ratings,
                                     rating_min=rating_min, rating_max=rating_max)


def split(ds: RatingDataset, ratio: float, seed: int) -> SplitPair:
    """Seeded uniform random partition into train and test.

    ``|train|`` is ``round(ratio * |ds|)``, so it differs from the exact
    fraction by at most one triple.  Both halves inherit the source's
    dimensions, scale and id maps; users or items that end up with no
    training ratings are handled downstream as cold-start.

    Deterministic for a fixed (dataset, ratio, seed).
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ds))
    n_train = int(round(ratio * len(ds)))
    train = ds.take(np.sort(perm[:n_train]))
    test = ds.take(np.sort(perm[n_train:]))
    return SplitPair(train=train, test=test, ratio=ratio, seed=seed)


def global_mean(ds: RatingDataset) -> float:
    """Arithmetic mean of all ratings (cold-start fallback value)."""
    if len(ds) == 0:
        raise DatasetError("global mean of an empty dataset is undefined")
    return float(np.mean(ds.ratings))


def sparsity(ds: RatingDataset) -> float:
    """Fraction of the user-item grid with no observed rating."""
    if ds.num_users <= 0 or ds.num_items <= 0:
        raise ValueError("sparsity requires positive dimensions")
    return 1.0 - len(ds) / (ds.num_users * ds.num_items)
