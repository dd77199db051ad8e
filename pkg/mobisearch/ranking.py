"""Ranked app lists produced by every ranker in the package."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True, slots=True)
class RankedPrediction:
    """Ordered (app, score) list for one query or one recommendation instant."""

    apps: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.apps) != len(self.scores):
            raise ValueError("apps and scores must have the same length")

    def __len__(self) -> int:
        return len(self.apps)

    def __iter__(self):
        return iter(zip(self.apps, self.scores, strict=True))

    def rank_of(self, app: str) -> int | None:
        """1-based rank of ``app``, or None when it is not in the list."""
        try:
            return self.apps.index(app) + 1
        except ValueError:
            return None

    def top(self, k: int) -> RankedPrediction:
        return RankedPrediction(self.apps[:k], self.scores[:k])

    def score_map(self) -> dict[str, float]:
        return dict(zip(self.apps, self.scores, strict=True))

    def to_dict(self) -> dict[str, Any]:
        return {"apps": list(self.apps), "scores": list(self.scores)}


def rank_scores(
    scores: Mapping[str, float],
    tie_order: Sequence[str] | None = None,
) -> RankedPrediction:
    """Sort apps by descending score.

    Ties fall back to the position in ``tie_order`` when given (apps missing
    from it go after, by id) and to ascending app id otherwise.
    """
    for app, value in scores.items():
        if not math.isfinite(value):
            raise ValueError(f"Non-finite score for app '{app}'")

    if tie_order is None:
        key = lambda app: (-scores[app], 0, app)  # noqa: E731
    else:
        position = {app: i for i, app in enumerate(tie_order)}
        fallback = len(position)
        key = lambda app: (-scores[app], position.get(app, fallback), app)  # noqa: E731

    ordered = sorted(scores, key=key)
    return RankedPrediction(tuple(ordered), tuple(float(scores[a]) for a in ordered))


def rank_array(
    apps: Sequence[str],
    values: Iterable[float],
    tie_order: Sequence[str] | None = None,
) -> RankedPrediction:
    """``rank_scores`` for parallel app / score sequences."""
    return rank_scores(dict(zip(apps, values, strict=True)), tie_order)
