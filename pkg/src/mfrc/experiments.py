"""Experiment driver: seeded sweeps over models, k, training ratio and
normalization, with per-cell isolation and CSV reporting.

Each repeat r re-splits the source data with seed ``base_seed + r`` and
that same seed drives model initialization, so a repeat depends only on
its own seed, never on which cells ran before it.  Result rows come out
in canonical cell-key order regardless of execution order.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .data import RatingDataset, ingest, read_interchange, split
from .metrics import evaluate
from .models import (DivergenceError, MODEL_KINDS, SingularMatrixError,
                     TRAINERS, TrainConfig, train_mfrc)
from .weighting import NORMALIZATIONS, build_weights

DATASET_FORMATS = ("ml-100k", "ml-1m", "interchange")

#: Column order of the results CSV; wall_time stays last so byte-level
#: comparisons can drop it.
RESULT_COLUMNS = ("model", "k", "alpha", "norm", "seed", "rmse", "fcp",
                  "concordant", "discordant", "skipped", "fallbacks",
                  "test_size", "wall_time")
AGGREGATE_COLUMNS = ("model", "k", "alpha", "norm", "repeats", "mean_rmse", "mean_fcp")

#: Sweep count for exact-solve training when the config gives no
#: per-model override; SGD epoch counts would be far too many.
ALSWR_DEFAULT_SWEEPS = 20

_MODEL_ORDER = ("plain_mf", "biased_mf", "alswr", "mfrc")


@dataclass(frozen=True)
class ResultRow:
    model: str
    k: int
    alpha: float
    norm: str
    seed: int
    rmse: float
    fcp: float | None
    concordant: int
    discordant: int
    skipped: int
    fallbacks: int
    test_size: int
    wall_time: float

    def key(self):
        return (self.model, self.k, self.alpha, self.norm, self.seed)


@dataclass(frozen=True)
class AggregateRow:
    model: str
    k: int
    alpha: float
    norm: str
    repeats: int
    mean_rmse: float
    mean_fcp: float | None

    def key(self):
        return (self.model, self.k, self.alpha, self.norm)


@dataclass
class ExperimentSpec:
    """Declarative description of one sweep.

    ``hyper`` holds per-model overrides of the shared hyperparameters,
    e.g. ``{"alswr": {"epochs": 30}}``.  ``norms`` applies to the
    weighted model only; baselines run once per (k, alpha, repeat) with
    the norm column recorded as ``-``.
    """

    dataset: str
    format: str = "interchange"
    models: list = field(default_factory=lambda: ["mfrc"])
    k_values: list = field(default_factory=lambda: [50])
    alpha_values: list = field(default_factory=lambda: [0.8])
    norms: list = field(default_factory=lambda: ["tanh"])
    repeats: int = 5
    base_seed: int = 0
    epochs: int = 100
    lam: float = 0.05
    eta: float = 0.005
    delta: float = 1e-6
    init_sigma: float | None = None
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.format not in DATASET_FORMATS:
            raise ValueError(f"unknown dataset format {self.format!r}")
        if not self.models or not self.k_values or not self.alpha_values or not self.norms:
            raise ValueError("models, k_values, alpha_values and norms must be nonempty")
        for model in self.models:
            if model not in MODEL_KINDS:
                raise ValueError(f"unknown model kind {model!r}")
        for norm in self.norms:
            if norm not in NORMALIZATIONS:
                raise ValueError(f"unknown normalization {norm!r}")
        for alpha in self.alpha_values:
            if not 0.0 < alpha < 1.0:
                raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        for model in self.hyper:
            if model not in MODEL_KINDS:
                raise ValueError(f"hyper override for unknown model {model!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        if "dataset" not in doc:
            raise ValueError("experiment config requires a 'dataset' path")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        with Path(path).open("r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid experiment config: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: experiment config must be a JSON object")
        return cls.from_dict(doc)

    def config_for(self, model: str, k: int, norm: str, seed: int) -> TrainConfig:
        """Resolve the training config for one cell."""
        over = self.hyper.get(model, {})
        epochs = self.epochs if model != "alswr" else ALSWR_DEFAULT_SWEEPS
        return TrainConfig(
            k=int(over.get("k", k)),
            epochs=int(over.get("epochs", epochs)),
            lam=float(over.get("lam", self.lam)),
            eta=float(over.get("eta", self.eta)),
            seed=seed,
            norm=norm if norm != "-" else "tanh",
            delta=float(over.get("delta", self.delta)),
            init_sigma=over.get("init_sigma", self.init_sigma),
        )


def load_dataset(spec: ExperimentSpec) -> RatingDataset:
    if spec.format == "interchange":
        return read_interchange(spec.dataset)
    return ingest(spec.dataset, spec.format)


def _cells(spec: ExperimentSpec):
    """Deterministic enumeration of (model, k, norm) cell coordinates."""
    for model in spec.models:
        for k in spec.k_values:
            if model == "mfrc":
                for norm in spec.norms:
                    yield model, k, norm
            else:
                yield model, k, "-"


def run_experiment(spec: ExperimentSpec, dataset: RatingDataset | None = None,
                   log=None):
    """Run the full sweep.

    Returns ``(rows, aggregates, failures)``.  A diverging cell is
    recorded in ``failures`` as ``(cell key string, error message)`` and
    the sweep continues; its repeats are simply missing from the rows.
    """
    if log is None:
        log = lambda msg: None
    if dataset is None:
        dataset = load_dataset(spec)
    rows = []
    failures = []
    for alpha in spec.alpha_values:
        for rep in range(spec.repeats):
            seed = spec.base_seed + rep
            pair = split(dataset, alpha, seed)
            weight_cache = {}
            for model, k, norm in _cells(spec):
                cfg = spec.config_for(model, k, norm, seed)
                start = time.perf_counter()
                try:
                    if model == "mfrc":
                        if norm not in weight_cache:
                            weight_cache[norm] = build_weights(pair.train, norm, cfg.delta)
                        trained, _ = train_mfrc(pair.train, weight_cache[norm], cfg)
                    else:
                        trained, _ = TRAINERS[model](pair.train, cfg)
                    report = evaluate(trained, pair.test)
                except (DivergenceError, SingularMatrixError) as exc:
                    failures.append((f"{model},k={k},alpha={alpha},norm={norm},seed={seed}",
                                     str(exc)))
                    log(f"FAILED {model} k={k} alpha={alpha} norm={norm} seed={seed}: {exc}")
                    continue
                elapsed = time.perf_counter() - start
                rows.append(ResultRow(
                    model=model, k=k, alpha=alpha, norm=norm, seed=seed,
                    rmse=report.rmse, fcp=report.fcp, concordant=report.concordant,
                    discordant=report.discordant, skipped=report.skipped_pairs,
                    fallbacks=report.fallback_predictions, test_size=report.test_size,
                    wall_time=elapsed))
                log(f"done {model} k={k} alpha={alpha} norm={norm} seed={seed} "
                    f"rmse={report.rmse:.4f}")
    rows.sort(key=ResultRow.key)
    return rows, aggregate(rows), failures


def aggregate(rows) -> list:
    """Mean RMSE and FCP per (model, k, alpha, norm) over repeats."""
    groups = {}
    for row in rows:
        groups.setdefault((row.model, row.k, row.alpha, row.norm), []).append(row)
    out = []
    for key in sorted(groups):
        members = groups[key]
        fcps = [r.fcp for r in members if r.fcp is not None]
        out.append(AggregateRow(
            model=key[0], k=key[1], alpha=key[2], norm=key[3],
            repeats=len(members),
            mean_rmse=sum(r.rmse for r in members) / len(members),
            mean_fcp=sum(fcps) / len(fcps) if fcps else None))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows_csv(rows, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for row in rows:
            doc = asdict(row)
            fh.write(",".join(_fmt(doc[c]) for c in RESULT_COLUMNS) + "\n")


def read_rows_csv(path) -> list:
    """Parse a results CSV back into :class:`ResultRow` objects.

    Raises ValueError on a missing/mismatched header or malformed rows.
    """
    path = Path(path)
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty results file") from None
        if tuple(header) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected results schema {header!r}")
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(RESULT_COLUMNS):
                raise ValueError(f"{path}:{line_no}: expected {len(RESULT_COLUMNS)} fields")
            try:
                rows.append(ResultRow(
                    model=rec[0], k=int(rec[1]), alpha=float(rec[2]), norm=rec[3],
                    seed=int(rec[4]), rmse=float(rec[5]),
                    fcp=float(rec[6]) if rec[6] else None,
                    concordant=int(rec[7]), discordant=int(rec[8]), skipped=int(rec[9]),
                    fallbacks=int(rec[10]), test_size=int(rec[11]),
                    wall_time=float(rec[12])))
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: malformed row: {exc}") from exc
    return rows


def write_aggregates_csv(aggs, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for agg in aggs:
            doc = asdict(agg)
            fh.write(",".join(_fmt(doc[c]) for c in AGGREGATE_COLUMNS) + "\n")


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else None


def pivot(rows, metric: str, index: str) -> tuple[list, list, dict]:
    """Mean ``metric`` per (index value, model) cell.

    Returns (index values, model columns, {(index, model): mean}); models
    order follows the conventional baseline-to-weighted ordering.
    """
    if metric not in ("rmse", "fcp"):
        raise ValueError(f"unknown metric {metric!r}")
    if index not in ("alpha", "k"):
        raise ValueError(f"unknown pivot index {index!r}")
    values = sorted({getattr(r, index) for r in rows})
    models = [m for m in _MODEL_ORDER if any(r.model == m for r in rows)]
    cells = {}
    for iv in values:
        for model in models:
            member = [getattr(r, metric) for r in rows
                      if getattr(r, index) == iv and r.model == model
                      and getattr(r, metric) is not None]
            cells[(iv, model)] = _mean(member)
    return values, models, cells


def norm_pivot(rows) -> tuple[list, list, dict]:
    """Fig-style mean-RMSE grid of the weighted model: k rows, norm columns."""
    mfrc_rows = [r for r in rows if r.model == "mfrc"]
    ks = sorted({r.k for r in mfrc_rows})
    norms = [n for n in NORMALIZATIONS if any(r.norm == n for r in mfrc_rows)]
    cells = {}
    for k in ks:
        for norm in norms:
            member = [r.rmse for r in mfrc_rows if r.k == k and r.norm == norm]
            cells[(k, norm)] = _mean(member)
    return ks, norms, cells


def write_report(rows, out_dir) -> list:
    """Emit pivot CSVs for RMSE and FCP (plus the norm grid when the
    weighted model is present).  Returns the written paths.

    The pivot index is alpha when it varies, else k.
    """
    if not rows:
        raise ValueError("cannot build a report from zero result rows")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = "alpha" if len({r.alpha for r in rows}) > 1 else "k"
    written = []
    for metric in ("rmse", "fcp"):
        values, models, cells = pivot(rows, metric, index)
        path = out_dir / f"{metric}_by_{index}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(",".join([index] + models) + "\n")
            for iv in values:
                cols = [_fmt(iv)] + [_fmt(cells[(iv, m)]) for m in models]
                fh.write(",".join(cols) + "\n")
        written.append(path)
    ks, norms, cells = norm_pivot(rows)
    if ks and norms:
        path = out_dir / "rmse_by_norm.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(["k"] + norms) + "\n")
            for k in ks:
                fh.write(",".join([_fmt(k)] + [_fmt(cells[(k, n)]) for n in norms]) + "\n")
        written.append(path)
    return written
