"""Query-independent rankers: most frequently and most recently used."""

from __future__ import annotations

import bisect
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence

from ..dataio.records import UsageEvent
from ..ranking import RankedPrediction, rank_scores
from ..utils.errors import EmptyInputError


def app_counts(labels: Iterable[str]) -> Counter[str]:
    return Counter(labels)


def mfu_rank(
    counts: Mapping[str, int],
    candidates: Iterable[str] | None = None,
) -> RankedPrediction:
    """Apps by descending training frequency, ties by app id.

    Candidates without a count score 0.
    """
    apps = set(candidates) if candidates is not None else set(counts)
    if not apps:
        raise EmptyInputError("MFU needs at least one app")
    return rank_scores({app: float(counts.get(app, 0)) for app in apps})


def mru_rank(
    history: Sequence[UsageEvent],
    t: int,
    mfu: RankedPrediction,
) -> RankedPrediction:
    """Candidates by the recency of their last use before ``t``.

    ``history`` is one user's records sorted by timestamp. Apps not used
    before ``t`` follow in MFU order.
    """
    candidates = set(mfu.apps)
    end = bisect.bisect_left(history, t, key=lambda event: event.timestamp)
    order: list[str] = []
    seen: set[str] = set()
    for event in reversed(history[:end]):
        if event.app_id in candidates and event.app_id not in seen:
            seen.add(event.app_id)
            order.append(event.app_id)
            if len(seen) == len(candidates):
                break
    order.extend(app for app in mfu.apps if app not in seen)
    n = len(order)
    return RankedPrediction(tuple(order), tuple(float(n - i) for i in range(n)))
