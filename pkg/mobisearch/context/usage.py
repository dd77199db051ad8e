"""Foreground-time usage contexts.

A ``ContextIndex`` answers "how long did this user spend in each app during
[start, end)". It is built either from periodic usage-statistics snapshots
or from raw usage events, where a launch/interact event keeps its app in the
foreground until the user's next recorded event.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np
import structlog

from ..dataio.records import USAGE_KINDS, EventKind, UsageEvent, UsageStat
from ..utils.errors import ValidationFailure
from .bins import HOURS_PER_BIN, NUM_BINS, bin_start, time_bin

logger = structlog.get_logger(__name__)

DAY = 86400
FOREGROUND_CAP = 300


@dataclass(frozen=True, slots=True)
class UsageContextDistribution:
    """Share of foreground time per app inside ``[start, end)``."""

    user_id: str
    start: int
    end: int
    seconds: Mapping[str, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.seconds.values()))

    @property
    def empty(self) -> bool:
        return self.total <= 0.0

    @property
    def window(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def probs(self) -> dict[str, float]:
        total = self.total
        if total <= 0.0:
            return {}
        return {app: s / total for app, s in sorted(self.seconds.items()) if s > 0.0}

    def ranked_apps(self) -> list[str]:
        """Apps by descending time, ties by app id; apps with no time excluded."""
        used = [app for app, s in self.seconds.items() if s > 0.0]
        return sorted(used, key=lambda app: (-self.seconds[app], app))

    def vector(self, index: Mapping[str, int], size: int, unk: int | None = None) -> np.ndarray:
        """Dense probability vector over rows of an app matrix.

        Apps without a row go to ``unk``; they are dropped when there is no UNK
        row, and the remaining mass is renormalized.
        """
        out = np.zeros(size)
        for app, prob in self.probs.items():
            row = index.get(app, unk)
            if row is not None:
                out[row] += prob
        mass = out.sum()
        if mass > 0.0 and abs(mass - 1.0) > 1e-12:
            out /= mass
        return out


@dataclass(slots=True)
class _Intervals:
    starts: np.ndarray
    ends: np.ndarray
    codes: np.ndarray


class ContextIndex:
    """Per-user foreground-time lookup."""

    def __init__(self) -> None:
        self.apps: list[str] = []
        self._codes: dict[str, int] = {}
        self._intervals: dict[str, _Intervals] = {}
        self._snapshot_times: dict[str, np.ndarray] = {}
        self._snapshots: dict[str, list[dict[str, float]]] = {}
        self.clamped = 0

    def _code(self, app: str) -> int:
        code = self._codes.get(app)
        if code is None:
            code = len(self.apps)
            self._codes[app] = code
            self.apps.append(app)
        return code

    @property
    def has_events(self) -> bool:
        return bool(self._intervals)

    @property
    def users(self) -> list[str]:
        return sorted(set(self._intervals) | set(self._snapshots))

    @classmethod
    def from_events(cls, events: Iterable[UsageEvent], cap: int = FOREGROUND_CAP) -> ContextIndex:
        """Intervals from each launch/interact event to the user's next event.

        An interval closed by a close event of the same app keeps its full
        length; any other interval is capped at ``cap`` seconds. Events are
        taken in record order per user. A next event that carries an
        earlier timestamp (clock skew) gives a zero-length interval and is
        counted in ``clamped``.
        """
        index = cls()
        per_user: dict[str, list[UsageEvent]] = defaultdict(list)
        for event in events:
            per_user[event.user_id].append(event)

        for user, user_events in per_user.items():
            starts: list[float] = []
            ends: list[float] = []
            codes: list[int] = []
            for position, event in enumerate(user_events):
                if event.kind not in USAGE_KINDS:
                    continue
                start = float(event.timestamp)
                closed = False
                if position + 1 < len(user_events):
                    following = user_events[position + 1]
                    end = float(following.timestamp)
                    closed = following.kind == EventKind.CLOSE and following.app_id == event.app_id
                else:
                    end = start
                if end < start:
                    index.clamped += 1
                    end = start
                starts.append(start)
                ends.append(end if closed else min(end, start + cap))
                codes.append(index._code(event.app_id))
            index._intervals[user] = _Intervals(
                np.asarray(starts), np.asarray(ends), np.asarray(codes, dtype=np.int64)
            )
        if index.clamped:
            logger.warning("Clamped negative usage durations", count=index.clamped)
        return index

    @classmethod
    def from_stats(cls, stats: Iterable[UsageStat]) -> ContextIndex:
        """Index over 24-hour usage snapshots keyed by snapshot time."""
        index = cls()
        grouped: dict[str, dict[int, dict[str, float]]] = defaultdict(lambda: defaultdict(dict))
        for stat in stats:
            index._code(stat.app_id)
            snapshot = grouped[stat.user_id][stat.timestamp]
            snapshot[stat.app_id] = snapshot.get(stat.app_id, 0.0) + stat.seconds
        for user, snapshots in grouped.items():
            times = sorted(snapshots)
            index._snapshot_times[user] = np.asarray(times, dtype=np.int64)
            index._snapshots[user] = [dict(snapshots[t]) for t in times]
        return index

    def seconds_between(self, user: str, start: int, end: int) -> dict[str, float]:
        """Foreground seconds per app inside [start, end), from events."""
        intervals = self._intervals.get(user)
        if intervals is None or intervals.starts.size == 0:
            return {}
        overlap = np.minimum(intervals.ends, end) - np.maximum(intervals.starts, start)
        overlap = np.clip(overlap, 0.0, None)
        totals = np.bincount(intervals.codes, weights=overlap, minlength=len(self.apps))
        return {self.apps[c]: float(totals[c]) for c in np.flatnonzero(totals > 0.0)}

    def distribution(self, user: str, t: int, horizon: int = DAY) -> UsageContextDistribution:
        """Usage context of ``user`` over [t - horizon, t).

        Snapshot indexes use the latest snapshot taken at or before ``t`` and
        report an empty context when it is older than the horizon.
        """
        if t <= 0:
            raise ValidationFailure("context time must be positive", t=t)
        start = t - horizon
        if user in self._snapshots:
            times = self._snapshot_times[user]
            position = int(np.searchsorted(times, t, side="right")) - 1
            if position < 0 or times[position] <= start:
                return UsageContextDistribution(user, start, t, {})
            snapshot_time = int(times[position])
            return UsageContextDistribution(
                user, snapshot_time - DAY, snapshot_time, dict(self._snapshots[user][position])
            )
        return UsageContextDistribution(user, start, t, self.seconds_between(user, start, t))

    def total_by_bin(self, user: str, offset: int) -> dict[int, dict[str, float]]:
        """Foreground seconds per (time bin of interval start, app) over all indexed history."""
        if not self.has_events:
            raise ValidationFailure("bin usage needs an index built from usage events")
        intervals = self._intervals.get(user)
        result: dict[int, dict[str, float]] = {b: {} for b in range(NUM_BINS)}
        if intervals is None or intervals.starts.size == 0:
            return result
        hours = ((intervals.starts.astype(np.int64) + offset) // 3600) % 24
        bins = hours // HOURS_PER_BIN
        durations = intervals.ends - intervals.starts
        for b in range(NUM_BINS):
            selected = bins == b
            totals = np.bincount(
                intervals.codes[selected], weights=durations[selected], minlength=len(self.apps)
            )
            result[b] = {self.apps[c]: float(totals[c]) for c in np.flatnonzero(totals > 0.0)}
        return result


def usage_distribution(
    index: ContextIndex,
    user: str,
    t: int,
    horizon: int = DAY,
) -> UsageContextDistribution:
    """Normalized foreground time per app in the window before ``t``."""
    return index.distribution(user, t, horizon)


class BinUsageTable:
    """Per-user, per-time-bin foreground seconds for bin-conditioned contexts."""

    def __init__(
        self,
        index: ContextIndex,
        offsets: Mapping[str, int] | None = None,
        same_day: bool = False,
    ) -> None:
        self.index = index
        self.offsets = dict(offsets or {})
        self.same_day = same_day
        self._tables: dict[str, dict[int, dict[str, float]]] = {}

    def distribution(self, user: str, t: int) -> UsageContextDistribution:
        offset = self.offsets.get(user, 0)
        if self.same_day:
            start = bin_start(t, offset)
            return UsageContextDistribution(user, start, t, self.index.seconds_between(user, start, t))
        table = self._tables.get(user)
        if table is None:
            table = self.index.total_by_bin(user, offset)
            self._tables[user] = table
        return UsageContextDistribution(user, 0, t, table[time_bin(t, offset).index])
