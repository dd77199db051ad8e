"""Duplicate merging, app filtering and session segmentation."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from itertools import groupby
from typing import Any

import structlog

from ..utils.errors import UnsortedInputError
from .records import USAGE_KINDS, EventKind, Session, UsageEvent

logger = structlog.get_logger(__name__)

DUPLICATE_WINDOW = 60
SESSION_GAP = 300


def _check_sorted(items: Sequence[Any], by_user: bool) -> None:
    for i in range(1, len(items)):
        prev, cur = items[i - 1], items[i]
        if by_user and prev.user_id != cur.user_id:
            if prev.user_id > cur.user_id:
                raise UnsortedInputError(
                    "Input is not sorted by (user, timestamp)", position=i
                )
            continue
        if cur.timestamp < prev.timestamp:
            raise UnsortedInputError("Input is not sorted by timestamp", position=i)


def sort_by_user_time(items: Iterable[Any]) -> list[Any]:
    """Stable sort by (user_id, timestamp)."""
    return sorted(items, key=lambda item: (item.user_id, item.timestamp))


def dedup_usage(events: Sequence[UsageEvent]) -> list[UsageEvent]:
    """Merge a user's consecutive same-app events less than 60 s apart.

    A run is extended while each event follows the previous one of the run
    by less than ``DUPLICATE_WINDOW`` seconds; the run keeps its first record.
    Input must be sorted by (user, timestamp).
    """
    _check_sorted(events, by_user=True)
    kept: list[UsageEvent] = []
    previous: UsageEvent | None = None
    for event in events:
        if (
            previous is not None
            and previous.user_id == event.user_id
            and previous.app_id == event.app_id
            and event.timestamp - previous.timestamp < DUPLICATE_WINDOW
        ):
            previous = event
            continue
        kept.append(event)
        previous = event
    if len(kept) != len(events):
        logger.debug("Merged duplicate usage events", before=len(events), after=len(kept))
    return kept


def usage_records(
    events: Iterable[UsageEvent],
    kinds: frozenset[EventKind] = USAGE_KINDS,
) -> list[UsageEvent]:
    """App-usage records: events of the given kinds, sorted and deduplicated."""
    selected = [event for event in events if event.kind in kinds]
    return dedup_usage(sort_by_user_time(selected))


def filter_top_apps(events: Sequence[UsageEvent], n: int) -> list[UsageEvent]:
    """Keep only events of the ``n`` most frequent apps (ties by app id)."""
    counts = Counter(event.app_id for event in events)
    ranked = sorted(counts, key=lambda app: (-counts[app], app))
    keep = set(ranked[:n])
    logger.info("Filtered to most popular apps", kept_apps=len(keep), total_apps=len(counts))
    return [event for event in events if event.app_id in keep]


def segment_sessions(
    items: Sequence[Any],
    gap: int = SESSION_GAP,
    start_id: int = 0,
) -> list[Session]:
    """Split one user's time-ordered items on gaps strictly longer than ``gap``."""
    _check_sorted(items, by_user=False)
    sessions: list[Session] = []
    current: list[Any] = []

    def close() -> None:
        sessions.append(
            Session(
                session_id=start_id + len(sessions),
                user_id=current[0].user_id,
                items=tuple(current),
                start=current[0].timestamp,
                end=current[-1].timestamp,
            )
        )

    for item in items:
        if current and item.timestamp - current[-1].timestamp > gap:
            close()
            current = []
        current.append(item)
    if current:
        close()
    return sessions


def sessionize(items: Iterable[Any], gap: int = SESSION_GAP) -> list[Session]:
    """Sessions for every user; ids increase across users in user-id order."""
    sessions: list[Session] = []
    for _, group in groupby(sort_by_user_time(items), key=lambda item: item.user_id):
        sessions.extend(segment_sessions(list(group), gap=gap, start_id=len(sessions)))
    return sessions
