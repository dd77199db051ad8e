"""Descriptive dataset statistics.

Means come with population standard deviations (divide by n). Query
characters are counted after collapsing whitespace runs to single spaces.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Sequence
from typing import Any

import numpy as np

from ..dataio.records import QueryRecord, Session
from .sessions import item_app


def _mean_sd(values: Sequence[float]) -> dict[str, float]:
    array = np.asarray(values, dtype=np.float64)
    if array.size == 0:
        return {"mean": 0.0, "sd": 0.0}
    return {"mean": float(array.mean()), "sd": float(array.std())}


def query_terms(query: str) -> int:
    return len(query.split())


def query_characters(query: str) -> int:
    return len(" ".join(query.split()))


def descriptive_stats(records: Sequence[Any], sessions: Sequence[Session]) -> dict[str, Any]:
    """Counts and per-user / per-session distributions of a query or usage dataset."""
    per_user: dict[str, list[Any]] = defaultdict(list)
    for record in records:
        per_user[record.user_id].append(record)

    durations = [float(s.end - s.start) for s in sessions]
    switches = [
        sum(1 for a, b in zip(s.items, s.items[1:], strict=False) if item_app(a) != item_app(b))
        for s in sessions
    ]
    report: dict[str, Any] = {
        "users": len(per_user),
        "records": len(records),
        "sessions": len(sessions),
        "apps": len({item_app(r) for r in records}),
        "records_per_user": _mean_sd([len(v) for v in per_user.values()]),
        "records_per_session": _mean_sd([len(s.items) for s in sessions]),
        "unique_apps_per_user": _mean_sd([len({item_app(r) for r in v}) for v in per_user.values()]),
        "unique_apps_per_session": _mean_sd([len({item_app(r) for r in s.items}) for s in sessions]),
        "session_seconds": {
            **_mean_sd(durations),
            "median": float(np.median(durations)) if durations else 0.0,
        },
        "app_switches_per_session": _mean_sd(switches),
        "metadata": {"sd": "population"},
    }
    queries = [r for r in records if isinstance(r, QueryRecord)]
    if queries:
        report["terms_per_query"] = _mean_sd([query_terms(q.query) for q in queries])
        report["characters_per_query"] = _mean_sd([query_characters(q.query) for q in queries])
    return report
