"""Usage-context interpolation on top of any base ranking, plus tuning helpers."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
import structlog

from ..context.usage import UsageContextDistribution
from ..evalx.metrics import ndcg_at_k
from ..ranking import RankedPrediction, rank_array
from ..utils.errors import ValidationFailure

logger = structlog.get_logger(__name__)

LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
NEIGHBOR_GRID = (1, 5, 10, 20, 50)


def normalize_scores(values: np.ndarray) -> np.ndarray:
    """Map scores onto [0, 1].

    All-equal vectors become 0.5 everywhere; vectors already inside [0, 1]
    are kept; anything else is min-max scaled.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    low, high = float(values.min()), float(values.max())
    if high == low:
        return np.full_like(values, 0.5)
    if low >= 0.0 and high <= 1.0:
        return values
    return (values - low) / (high - low)


def context_filter_cr(
    base: RankedPrediction,
    dist: UsageContextDistribution,
    lam: float,
) -> RankedPrediction:
    """lam * usage share + (1 - lam) * base score, re-ranked; ties keep base order."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationFailure("interpolation weight must lie in [0, 1]", lam=lam)
    probs = dist.probs
    base_scores = normalize_scores(np.asarray(base.scores))
    context_scores = normalize_scores(np.array([probs.get(app, 0.0) for app in base.apps]))
    combined = lam * context_scores + (1.0 - lam) * base_scores
    return rank_array(base.apps, combined, tie_order=base.apps)


def mean_ndcg3(rankings: Sequence[RankedPrediction], targets: Sequence[str]) -> float:
    if not rankings:
        return 0.0
    return float(np.mean([ndcg_at_k(r, t, 3) for r, t in zip(rankings, targets, strict=True)]))


def tune_interpolation(
    bases: Sequence[RankedPrediction],
    contexts: Sequence[UsageContextDistribution],
    targets: Sequence[str],
    grid: Sequence[float] = LAMBDA_GRID,
) -> tuple[float, list[dict[str, float]]]:
    """Weight with the best validation nDCG@3; the smallest wins ties."""
    table = []
    for lam in grid:
        rankings = [context_filter_cr(b, c, lam) for b, c in zip(bases, contexts, strict=True)]
        table.append({"lambda": float(lam), "ndcg@3": mean_ndcg3(rankings, targets)})
    best = max(table, key=lambda row: (row["ndcg@3"], -row["lambda"]))
    logger.info("Tuned interpolation weight", lam=best["lambda"], ndcg3=best["ndcg@3"])
    return best["lambda"], table


def tune_neighbors(
    rank: Callable[[Sequence[str], int], RankedPrediction],
    queries: Sequence[Sequence[str]],
    targets: Sequence[str],
    grid: Sequence[int] = NEIGHBOR_GRID,
) -> tuple[int, list[dict[str, float]]]:
    """K with the best validation nDCG@3; the smallest wins ties."""
    table = []
    for k in grid:
        rankings = [rank(q, k) for q in queries]
        table.append({"k": k, "ndcg@3": mean_ndcg3(rankings, targets)})
    best = max(table, key=lambda row: (row["ndcg@3"], -row["k"]))
    logger.info("Tuned neighbor count", k=best["k"], ndcg3=best["ndcg@3"])
    return int(best["k"]), table
