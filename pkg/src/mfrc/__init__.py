"""Reliability-weighted matrix factorization for explicit ratings.

The package splits into five areas: :mod:`mfrc.data` (ingestion and
splitting), :mod:`mfrc.weighting` (rating centrality and reliability
weights), :mod:`mfrc.models` (trainers and prediction),
:mod:`mfrc.metrics` (RMSE / FCP evaluation) and :mod:`mfrc.experiments`
(sweep harness).  The most common entry points are re-exported here.
"""

from .data import (RatingDataset, RatingTriple, SplitPair, global_mean,
                   ingest, read_interchange, split, sparsity,
                   write_interchange)
from .weighting import (NORMALIZATIONS, ReliabilityWeights, build_weights,
                        combine, item_centrality, item_means,
                        rating_centrality, user_centrality, user_means)
from .models import (FactorModel, TrainConfig, TrainTrace, DivergenceError,
                     MODEL_KINDS, load_model, objective, save_model,
                     sgd_step_mfrc, train_alswr, train_biased_mf,
                     train_mfrc, train_plain_mf)
from .metrics import EvalReport, evaluate, fcp, rmse
from .experiments import ExperimentSpec, ResultRow, run_experiment

__version__ = "0.1.0"

__all__ = [
    "RatingDataset", "RatingTriple", "SplitPair", "ingest", "split",
    "read_interchange", "write_interchange", "global_mean", "sparsity",
    "NORMALIZATIONS", "ReliabilityWeights", "build_weights", "combine",
    "rating_centrality", "user_centrality", "item_centrality",
    "user_means", "item_means",
    "FactorModel", "TrainConfig", "TrainTrace", "DivergenceError",
    "MODEL_KINDS", "train_mfrc", "train_biased_mf", "train_plain_mf",
    "train_alswr", "objective", "sgd_step_mfrc", "save_model", "load_model",
    "EvalReport", "evaluate", "rmse", "fcp",
    "ExperimentSpec", "ResultRow", "run_experiment",
    "__version__",
]
