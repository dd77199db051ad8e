"""Recent-app windows and context embeddings."""

from __future__ import annotations

import bisect
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from ..dataio.records import UsageEvent
from ..dataio.text import PAD
from ..utils.errors import UnknownAppError, ValidationFailure
from .usage import UsageContextDistribution


@dataclass(frozen=True, slots=True)
class AppWindow:
    """Exactly k app ids, oldest first, padded only at the oldest positions."""

    apps: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.apps:
            raise ValueError("an app window holds at least one position")
        seen_app = False
        for app in self.apps:
            if app == PAD and seen_app:
                raise ValueError("pad tokens may only fill the oldest positions")
            seen_app = seen_app or app != PAD

    @property
    def k(self) -> int:
        return len(self.apps)


def recent_apps(history: Sequence[UsageEvent], t: int, k: int = 9) -> AppWindow:
    """The k most recent records strictly before ``t``, newest last.

    ``history`` is one user's deduplicated records sorted by timestamp.
    """
    if k < 1:
        raise ValidationFailure("window size k must be at least 1", k=k)
    end = bisect.bisect_left(history, t, key=lambda event: event.timestamp)
    recent = [event.app_id for event in history[max(0, end - k) : end]]
    return AppWindow((PAD,) * (k - len(recent)) + tuple(recent))


def context_embedding(
    dist: UsageContextDistribution,
    app_matrix: np.ndarray,
    app_index: Mapping[str, int],
    unk_row: int | None = None,
) -> np.ndarray:
    """Probability-weighted sum of app rows; zero vector for an empty context."""
    out = np.zeros(app_matrix.shape[1])
    for app, prob in dist.probs.items():
        row = app_index.get(app, unk_row)
        if row is None:
            raise UnknownAppError(f"No row for app '{app}' and no UNK row", app=app)
        out += prob * app_matrix[row]
    return out
