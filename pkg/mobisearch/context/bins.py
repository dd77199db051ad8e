"""Local-time helpers: hours, weekdays and the eight three-hour bins."""

from __future__ import annotations

from dataclasses import dataclass

NUM_BINS = 8
HOURS_PER_BIN = 24 // NUM_BINS


@dataclass(frozen=True, slots=True)
class TimeBin:
    index: int

    def __post_init__(self) -> None:
        if not 0 <= self.index < NUM_BINS:
            raise ValueError(f"time bin {self.index} outside 0..{NUM_BINS - 1}")


def local_hour(t: int, offset: int = 0) -> int:
    return ((t + offset) // 3600) % 24


def day_of_week(t: int, offset: int = 0) -> int:
    """0 = Monday; the epoch started on a Thursday."""
    return ((t + offset) // 86400 + 3) % 7


def time_bin(t: int, offset: int = 0) -> TimeBin:
    """Three-hour bin of the local time of day."""
    return TimeBin(local_hour(t, offset) // HOURS_PER_BIN)


def bin_start(t: int, offset: int = 0) -> int:
    """UTC epoch second at which the local bin containing ``t`` began."""
    local = t + offset
    day_start = local - local % 86400
    return day_start + time_bin(t, offset).index * HOURS_PER_BIN * 3600 - offset
