"""Held-out evaluation: RMSE and the fraction of concordant pairs.

FCP looks only at pairs of test items rated by the same user with
distinct true ratings; the pair is concordant when the predicted order
matches the true order, otherwise discordant (predicted ties count as
discordant, since a constant predictor ranks nothing).  Counts are
aggregated globally over users, not macro-averaged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .data import RatingDataset
from .models import FactorModel


@dataclass(frozen=True)
class EvalReport:
    """Evaluation summary over one test set.

    ``fcp`` is None when no user has two test items with distinct true
    ratings (undefined, not zero).  ``fallback_predictions`` counts test
    pairs served by the cold-start fallback.
    """

    rmse: float
    fcp: float | None
    concordant: int
    discordant: int
    skipped_pairs: int
    test_size: int
    fallback_predictions: int


def rmse(pairs: Iterable[tuple[float, float]]) -> float:
    """Root mean squared error over (true, predicted) pairs."""
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("rmse of an empty pair list is undefined")
    diff = arr[:, 0] - arr[:, 1]
    return float(np.sqrt(np.mean(diff * diff)))


def fcp(per_user: Mapping[int, Iterable[tuple[float, float]]]
        ) -> tuple[float | None, int, int, int]:
    """Fraction of concordant pairs over per-user (true, predicted) lists.

    Returns ``(fcp, concordant, discordant, skipped)``; ``fcp`` is None
    when no countable pair exists.
    """
    conc = disc = skip = 0
    for _, pairs in sorted(per_user.items()):
        arr = np.asarray(list(pairs), dtype=np.float64).reshape(-1, 2)
        c, d, s = _kernels.count_rank_pairs(np.ascontiguousarray(arr[:, 0]),
                                            np.ascontiguousarray(arr[:, 1]))
        conc += int(c)
        disc += int(d)
        skip += int(s)
    value = conc / (conc + disc) if (conc + disc) > 0 else None
    return value, conc, disc, skip


def evaluate(model: FactorModel, test: RatingDataset) -> EvalReport:
    """Score ``model`` on every test triple.

    Predictions are clipped to the rating scale; cold-start pairs are
    served by the fallback and counted, never skipped.
    """
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    values, fb = model.predict_batch(test.users, test.items)
    diff = test.ratings - values
    rmse_value = float(np.sqrt(np.mean(diff * diff)))

    conc = disc = skip = 0
    for u in range(test.num_users):
        pos = test.user_positions(u)
        if len(pos) < 2:
            continue
        c, d, s = _kernels.count_rank_pairs(test.ratings[pos],
                                            np.ascontiguousarray(values[pos]))
        conc += int(c)
        disc += int(d)
        skip += int(s)
    fcp_value = conc / (conc + disc) if (conc + disc) > 0 else None
    return EvalReport(rmse=rmse_value, fcp=fcp_value, concordant=conc,
                      discordant=disc, skipped_pairs=skip, test_size=len(test),
                      fallback_predictions=int(np.sum(fb)))
