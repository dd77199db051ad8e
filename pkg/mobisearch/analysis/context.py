"""Where targets sit in the usage context, and when and what people use."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..context.bins import day_of_week, local_hour
from ..context.usage import DAY, ContextIndex
from ..dataio.records import QueryRecord


@dataclass(slots=True)
class RankHistogram:
    """Counts of target ranks 1..max_rank; ``overflow`` also holds absent targets."""

    max_rank: int
    counts: list[int] = field(default_factory=list)
    overflow: int = 0
    absent: int = 0

    def __post_init__(self) -> None:
        if not self.counts:
            self.counts = [0] * self.max_rank

    @property
    def total(self) -> int:
        return sum(self.counts) + self.overflow

    def fractions(self) -> dict[str, float]:
        total = max(self.total, 1)
        result = {str(rank): n / total for rank, n in enumerate(self.counts, start=1)}
        result[f">{self.max_rank}"] = self.overflow / total
        return result

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_rank": self.max_rank,
            "counts": self.counts,
            "overflow": self.overflow,
            "absent": self.absent,
            "fractions": self.fractions(),
        }


def context_rank_histogram(
    queries: Iterable[QueryRecord],
    index: ContextIndex,
    max_rank: int = 10,
    horizon: int = DAY,
) -> RankHistogram:
    """Rank of each target in the user's 24 h usage ordering (most used = 1, ties by app id)."""
    histogram = RankHistogram(max_rank)
    for query in queries:
        ranked = index.distribution(query.user_id, query.timestamp, horizon).ranked_apps()
        if query.target_app not in ranked:
            histogram.overflow += 1
            histogram.absent += 1
            continue
        rank = ranked.index(query.target_app) + 1
        if rank > max_rank:
            histogram.overflow += 1
        else:
            histogram.counts[rank - 1] += 1
    return histogram


def temporal_distribution(
    records: Iterable[Any],
    offsets: Mapping[str, int] | None = None,
) -> dict[str, list[float]]:
    """Normalized hour-of-day (24) and day-of-week (7, Monday first) histograms in local time."""
    offsets = offsets or {}
    hours = np.zeros(24)
    days = np.zeros(7)
    for record in records:
        offset = offsets.get(record.user_id, 0)
        hours[local_hour(record.timestamp, offset)] += 1
        days[day_of_week(record.timestamp, offset)] += 1
    total = hours.sum()
    if total:
        hours /= total
        days /= total
    return {"hour": hours.tolist(), "weekday": days.tolist()}


def app_share(labels: Sequence[str], top_n: int = 10) -> dict[str, Any]:
    """Share of records covered by the ``top_n`` most frequent apps, plus the frequency table."""
    counts = Counter(labels)
    total = sum(counts.values())
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    covered = sum(n for _, n in ordered[:top_n])
    return {
        "top_n": top_n,
        "share": covered / total if total else 0.0,
        "apps": [
            {"app": app, "count": n, "fraction": n / total} for app, n in ordered
        ],
    }
