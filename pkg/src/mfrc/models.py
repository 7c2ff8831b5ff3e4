"""Latent-factor rating models and their trainers.

Four model kinds share one prediction surface:

- ``mfrc``       reliability-weighted SGD with user/item biases
- ``biased_mf``  the same updates with every weight fixed to 1
- ``plain_mf``   bias-free SGD on the squared error
- ``alswr``      alternating least squares, regularization scaled by
                 each entity's rating count

``mfrc`` and ``biased_mf`` run the identical compiled kernel, so biased
MF is exactly the unit-weight special case (bit-for-bit).  Training is
sequential and seeded; a fixed (dataset, config) pair always yields the
same model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .data import RatingDataset, global_mean
from .weighting import NORMALIZATIONS, ReliabilityWeights

MODEL_KINDS = ("mfrc", "biased_mf", "plain_mf", "alswr")
_SNAPSHOT_VERSION = "mfrc-model/1"


class DivergenceError(RuntimeError):
    """Training produced a non-finite parameter or objective."""

    def __init__(self, kind: str, epoch: int):
        self.kind = kind
        self.epoch = epoch
        super().__init__(f"{kind} training diverged at epoch {epoch}: non-finite value")


class SingularMatrixError(RuntimeError):
    """An ALS normal matrix could not be solved."""


class ModelFormatError(ValueError):
    """A model snapshot is corrupt or structurally invalid."""


class ModelVersionError(ModelFormatError):
    """A model snapshot carries an unsupported format version."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by all trainers.

    ``norm`` and ``delta`` only matter when building reliability weights
    for ``mfrc``; ``eta`` is ignored by ``alswr`` (exact solves).  The
    factor matrices initialize from N(0, init_sigma); the default sigma
    of ``0.1 / sqrt(k)`` keeps initial scores small against a stars
    scale.  Biases always start at zero.
    """

    k: int = 50
    epochs: int = 100
    lam: float = 0.05
    eta: float = 0.005
    seed: int = 0
    norm: str = "tanh"
    delta: float = 1e-6
    init_sigma: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.eta * self.lam >= 1:
            raise ValueError("eta * lam must stay below 1 (multiplicative shrink sign)")
        if self.norm not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.norm!r}")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.init_sigma is not None and self.init_sigma < 0:
            raise ValueError("init_sigma must be >= 0")

    @property
    def sigma(self) -> float:
        return self.init_sigma if self.init_sigma is not None else 0.1 / math.sqrt(self.k)


@dataclass
class TrainTrace:
    """Per-epoch objective and training RMSE (unclipped scores)."""

    objective: list[float]
    train_rmse: list[float]


@dataclass
class FactorModel:
    """Trained user/item factors with biases and cold-start metadata.

    ``user_factors`` is (num_users, k) with one row per user;
    ``item_factors`` likewise per item.  ``user_seen`` / ``item_seen``
    mark entities that had at least one training rating; predictions for
    anything else (or for out-of-range ids) fall back to the training
    global mean.  Treat a trained model as read-only; trainers are the
    single writer.
    """

    kind: str
    k: int
    num_users: int
    num_items: int
    user_factors: np.ndarray
    item_factors: np.ndarray
    user_bias: np.ndarray
    item_bias: np.ndarray
    user_seen: np.ndarray
    item_seen: np.ndarray
    fallback: float
    rating_min: float
    rating_max: float
    seed: int

    def predict_batch(self, users, items) -> tuple[np.ndarray, np.ndarray]:
        """Clipped predictions for parallel id arrays.

        Returns ``(values, is_fallback)``; a prediction is a fallback
        when either id is out of range or had no training ratings.
        """
        users = np.atleast_1d(np.asarray(users, dtype=np.int64))
        items = np.atleast_1d(np.asarray(items, dtype=np.int64))
        in_range = ((users >= 0) & (users < self.num_users)
                    & (items >= 0) & (items < self.num_items))
        u = np.where(in_range, users, 0)
        i = np.where(in_range, items, 0)
        raw = _kernels.predict_raw(u, i, self.user_factors, self.item_factors,
                                   self.user_bias, self.item_bias)
        known = in_range & self.user_seen[u] & self.item_seen[i]
        values = np.where(known, raw, self.fallback)
        np.clip(values, self.rating_min, self.rating_max, out=values)
        return values, ~known

    def predict(self, user: int, item: int) -> float:
        """Clipped prediction for one (user, item) pair."""
        values, _ = self.predict_batch([user], [item])
        return float(values[0])

    def predict_with_flag(self, user: int, item: int) -> tuple[float, bool]:
        """Prediction plus whether the fallback path served it."""
        values, flags = self.predict_batch([user], [item])
        return float(values[0]), bool(flags[0])


def _new_model(kind, cfg, train, P, Q, bu, bi):
    return FactorModel(
        kind=kind, k=cfg.k, num_users=train.num_users, num_items=train.num_items,
        user_factors=P, item_factors=Q, user_bias=bu, item_bias=bi,
        user_seen=train.user_counts() > 0, item_seen=train.item_counts() > 0,
        fallback=global_mean(train), rating_min=train.rating_min,
        rating_max=train.rating_max, seed=cfg.seed)


def _objective_terms(P, Q, bu, bi, users, items, ratings, w, wbu, wbi, lam):
    """Weighted loss over the given triples plus per-pair regularizer.

    Regularization is summed over training pairs, so an entity with c
    ratings contributes c copies of its (weighted) norm penalty; this is
    the quantity the per-rating SGD shrinkage descends.  Returns
    (objective, train_rmse), both from unclipped scores.
    """
    raw = _kernels.predict_raw(users, items, P, Q, bu, bi)
    e2 = (ratings - raw) ** 2
    pn = np.sum(P * P, axis=1) + bu * bu
    qn = np.sum(Q * Q, axis=1) + bi * bi
    reg = np.sum(wbu[users] * pn[users]) + np.sum(wbi[items] * qn[items])
    obj = float(np.sum(e2 * w) + lam * reg)
    rmse = float(np.sqrt(np.mean(e2)))
    return obj, rmse


def objective(model: FactorModel, train: RatingDataset, lam: float,
              weights: ReliabilityWeights | None = None) -> float:
    """Exact training objective of ``model`` on ``train``.

    ``weights`` must be given for ``mfrc`` models and omitted otherwise;
    the unweighted form doubles as the count-scaled ``alswr`` objective
    because summing an entity's norm once per training pair equals
    scaling it by its rating count.
    """
    if model.kind == "mfrc" and weights is None:
        raise ValueError("mfrc objective requires reliability weights")
    if model.kind != "mfrc" and weights is not None:
        raise ValueError(f"{model.kind} objective takes no reliability weights")
    if model.num_users != train.num_users or model.num_items != train.num_items:
        raise ValueError("model and dataset dimensions disagree")
    if weights is not None and len(weights.weights) != len(train):
        raise ValueError("weights are not aligned with the training triples")
    if weights is None:
        w = np.ones(len(train))
        wbu = np.ones(train.num_users)
        wbi = np.ones(train.num_items)
    else:
        w, wbu, wbi = weights.weights, weights.user_avg_weight, weights.item_avg_weight
    obj, _ = _objective_terms(model.user_factors, model.item_factors,
                              model.user_bias, model.item_bias,
                              train.users, train.items, train.ratings,
                              w, wbu, wbi, lam)
    return obj


def sgd_step_mfrc(model: FactorModel, user: int, item: int, rating: float,
                  w: float, wbar_u: float, wbar_i: float,
                  lam: float, eta: float) -> None:
    """Apply one reliability-weighted SGD update to ``model`` in place.

    The prediction error uses the unclipped score from the pre-update
    parameters; bias and factor updates all derive from that snapshot.
    Ids must be in range (the compiled kernel does not bounds-check).
    """
    if not (0 <= user < model.num_users and 0 <= item < model.num_items):
        raise IndexError(f"(user={user}, item={item}) out of range for a "
                         f"{model.num_users}x{model.num_items} model")
    use_bias = model.kind in ("mfrc", "biased_mf")
    _kernels.sgd_step(int(user), int(item), float(rating), float(w),
                      float(wbar_u), float(wbar_i),
                      model.user_factors, model.item_factors,
                      model.user_bias, model.item_bias,
                      float(lam), float(eta), use_bias)


def _train_sgd(train, w, wbu, wbi, cfg, kind, use_bias):
    if len(train) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    P = rng.normal(0.0, cfg.sigma, (train.num_users, cfg.k))
    Q = rng.normal(0.0, cfg.sigma, (train.num_items, cfg.k))
    bu = np.zeros(train.num_users)
    bi = np.zeros(train.num_items)
    users, items, ratings = train.users, train.items, train.ratings
    w = np.ascontiguousarray(w, dtype=np.float64)
    wbu = np.ascontiguousarray(wbu, dtype=np.float64)
    wbi = np.ascontiguousarray(wbi, dtype=np.float64)

    trace = TrainTrace(objective=[], train_rmse=[])
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        _kernels.sgd_epoch(users, items, ratings, w, wbu, wbi,
                           P, Q, bu, bi, cfg.lam, cfg.eta, order, use_bias)
        obj, rmse = _objective_terms(P, Q, bu, bi, users, items, ratings,
                                     w, wbu, wbi, cfg.lam)
        if not (np.isfinite(obj) and np.isfinite(rmse)):
            raise DivergenceError(kind, epoch)
        trace.objective.append(obj)
        trace.train_rmse.append(rmse)
    return _new_model(kind, cfg, train, P, Q, bu, bi), trace


def train_mfrc(train: RatingDataset, weights: ReliabilityWeights,
               cfg: TrainConfig) -> tuple[FactorModel, TrainTrace]:
    """Reliability-weighted SGD training.

    ``weights`` must have been built from this exact training split (one
    weight per triple, in triple order).
    """
    if len(weights.weights) != len(train):
        raise ValueError("weights are not aligned with the training triples")
    if (len(weights.user_avg_weight) != train.num_users
            or len(weights.item_avg_weight) != train.num_items):
        raise ValueError("weight averages do not match dataset dimensions")
    return _train_sgd(train, weights.weights, weights.user_avg_weight,
                      weights.item_avg_weight, cfg, "mfrc", use_bias=True)


def train_biased_mf(train: RatingDataset, cfg: TrainConfig):
    """Biased MF: the weighted updates with every weight fixed at 1."""
    return _train_sgd(train, np.ones(len(train)), np.ones(train.num_users),
                      np.ones(train.num_items), cfg, "biased_mf", use_bias=True)


def train_plain_mf(train: RatingDataset, cfg: TrainConfig):
    """Bias-free MF; user/item biases stay exactly zero."""
    return _train_sgd(train, np.ones(len(train)), np.ones(train.num_users),
                      np.ones(train.num_items), cfg, "plain_mf", use_bias=False)


def train_alswr(train: RatingDataset, cfg: TrainConfig):
    """Alternating least squares with count-scaled regularization.

    Each sweep solves every user row exactly given the item matrix, then
    every item row given the user matrix; ``cfg.epochs`` counts full
    sweeps.  The normal matrix for an entity with c ratings gets
    ``lam * c`` added to its diagonal, which is singular only when
    ``lam == 0`` and the system is rank-deficient.
    """
    if len(train) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    P = rng.normal(0.0, cfg.sigma, (train.num_users, cfg.k))
    Q = rng.normal(0.0, cfg.sigma, (train.num_items, cfg.k))
    bu = np.zeros(train.num_users)
    bi = np.zeros(train.num_items)
    users, items, ratings = train.users, train.items, train.ratings

    user_rows = [(train.items[pos], train.ratings[pos])
                 for pos in (train.user_positions(u) for u in range(train.num_users))]
    item_rows = [(train.users[pos], train.ratings[pos])
                 for pos in (train.item_positions(i) for i in range(train.num_items))]
    ones_w = np.ones(len(train))
    ones_u = np.ones(train.num_users)
    ones_i = np.ones(train.num_items)

    def solve_block(target, source, rows, label):
        for row, (idx, r) in enumerate(rows):
            c = len(idx)
            if c == 0:
                continue  # cold entity: stays at init, regularizer weight is 0
            if cfg.lam == 0.0 and c < cfg.k:
                raise SingularMatrixError(
                    f"{label} {row}: rank-deficient normal matrix with lam=0")
            F = source[idx]
            A = F.T @ F
            A.flat[::cfg.k + 1] += cfg.lam * c
            try:
                target[row] = np.linalg.solve(A, F.T @ r)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(f"{label} {row}: singular normal matrix") from exc

    trace = TrainTrace(objective=[], train_rmse=[])
    for sweep in range(cfg.epochs):
        solve_block(P, Q, user_rows, "user")
        solve_block(Q, P, item_rows, "item")
        obj, rmse = _objective_terms(P, Q, bu, bi, users, items, ratings,
                                     ones_w, ones_u, ones_i, cfg.lam)
        if not (np.isfinite(obj) and np.isfinite(rmse)):
            raise DivergenceError("alswr", sweep)
        trace.objective.append(obj)
        trace.train_rmse.append(rmse)
    return _new_model("alswr", cfg, train, P, Q, bu, bi), trace


TRAINERS = {
    "biased_mf": train_biased_mf,
    "plain_mf": train_plain_mf,
    "alswr": train_alswr,
}


def save_model(model: FactorModel, path) -> None:
    """Write a JSON snapshot; floats serialize with full round-trip
    precision (json uses repr)."""
    doc = {
        "format_version": _SNAPSHOT_VERSION,
        "kind": model.kind,
        "k": model.k,
        "m": model.num_users,
        "n": model.num_items,
        "scale": [model.rating_min, model.rating_max],
        "fallback": model.fallback,
        "seed": model.seed,
        "P": model.user_factors.ravel().tolist(),
        "Q": model.item_factors.ravel().tolist(),
        "b_u": model.user_bias.tolist(),
        "b_i": model.item_bias.tolist(),
        "user_seen": model.user_seen.astype(int).tolist(),
        "item_seen": model.item_seen.astype(int).tolist(),
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> FactorModel:
    """Read a snapshot written by :func:`save_model`.

    Raises:
        OSError: unreadable file.
        ModelVersionError: unsupported ``format_version``.
        ModelFormatError: corrupt JSON, missing fields, or array sizes
            that disagree with the declared dimensions.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: corrupt model snapshot: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: expected a JSON object")
    version = doc.get("format_version")
    if version != _SNAPSHOT_VERSION:
        raise ModelVersionError(
            f"{path}: unsupported snapshot version {version!r} (expected {_SNAPSHOT_VERSION})")
    try:
        kind = doc["kind"]
        k = int(doc["k"])
        m = int(doc["m"])
        n = int(doc["n"])
        lo, hi = (float(x) for x in doc["scale"])
        fallback = float(doc["fallback"])
        seed = int(doc["seed"])
        P = np.asarray(doc["P"], dtype=np.float64)
        Q = np.asarray(doc["Q"], dtype=np.float64)
        bu = np.asarray(doc["b_u"], dtype=np.float64)
        bi = np.asarray(doc["b_i"], dtype=np.float64)
        user_seen = np.asarray(doc["user_seen"], dtype=bool)
        item_seen = np.asarray(doc["item_seen"], dtype=bool)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: invalid model snapshot: {exc}") from exc
    if kind not in MODEL_KINDS:
        raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
    if k < 1 or m < 1 or n < 1:
        raise ModelFormatError(f"{path}: non-positive dimensions")
    if P.size != m * k or Q.size != n * k:
        raise ModelFormatError(f"{path}: factor array size disagrees with dimensions")
    if len(bu) != m or len(bi) != n or len(user_seen) != m or len(item_seen) != n:
        raise ModelFormatError(f"{path}: bias or mask length disagrees with dimensions")
    return FactorModel(kind=kind, k=k, num_users=m, num_items=n,
                       user_factors=P.reshape(m, k), item_factors=Q.reshape(n, k),
                       user_bias=bu, item_bias=bi, user_seen=user_seen,
                       item_seen=item_seen, fallback=fallback,
                       rating_min=lo, rating_max=hi, seed=seed)
