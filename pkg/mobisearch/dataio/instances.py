"""Prediction instances built inside split segments."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

from .records import PARTITIONS, DatasetSplit, UsageEvent
from .text import PAD


@dataclass(frozen=True, slots=True)
class RecommendationInstance:
    """(window of k previous apps, next app) for one user and instant."""

    instance_id: str
    user_id: str
    timestamp: int
    window: tuple[str, ...]
    label: str
    last_seen: int | None

    @property
    def k(self) -> int:
        return len(self.window)


def segments(
    events: Sequence[UsageEvent], split: DatasetSplit
) -> dict[str, dict[str, list[UsageEvent]]]:
    """partition -> user -> that user's events in the partition, oldest first."""
    result: dict[str, dict[str, list[UsageEvent]]] = {}
    for partition in PARTITIONS:
        per_user: dict[str, list[UsageEvent]] = defaultdict(list)
        for index in split.partition(partition):
            per_user[events[index].user_id].append(events[index])
        for user_events in per_user.values():
            user_events.sort(key=lambda e: e.timestamp)
        result[partition] = dict(per_user)
    return result


def build_recommendation_instances(
    events: Sequence[UsageEvent],
    split: DatasetSplit,
    k: int = 9,
    min_history: int | None = None,
) -> dict[str, list[RecommendationInstance]]:
    """One instance per record that has ``min_history`` predecessors in its segment.

    Windows never reach into another partition. With ``min_history`` below
    ``k`` the missing oldest positions hold the pad token.
    """
    needed = k if min_history is None else min_history
    instances: dict[str, list[RecommendationInstance]] = {}
    for partition, per_user in segments(events, split).items():
        built: list[RecommendationInstance] = []
        for user in sorted(per_user):
            seq = per_user[user]
            for j in range(max(needed, 0), len(seq)):
                history = seq[max(0, j - k) : j]
                window = (PAD,) * (k - len(history)) + tuple(e.app_id for e in history)
                built.append(
                    RecommendationInstance(
                        instance_id=f"{partition}:{user}:{j}",
                        user_id=user,
                        timestamp=seq[j].timestamp,
                        window=window,
                        label=seq[j].app_id,
                        last_seen=history[-1].timestamp if history else None,
                    )
                )
        instances[partition] = built
    return instances
