"""Record types read from and written to the TSV logs."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # Python 3.10 backport of enum.StrEnum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str.__str__(self)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(str(self), format_spec)


class EventKind(StrEnum):
    LAUNCH = "launch"
    INTERACT = "interact"
    CLOSE = "close"
    INSTALL = "install"
    UNINSTALL = "uninstall"


USAGE_KINDS = frozenset({EventKind.LAUNCH, EventKind.INTERACT})


class _Record(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    user_id: str = Field(..., min_length=1)
    timestamp: int = Field(..., gt=0, description="Epoch seconds, UTC")


class QueryRecord(_Record):
    """One reported cross-app search."""

    query: str = Field(..., description="Query text as typed")
    target_app: str = Field(..., min_length=1)

    @field_validator("query")
    @classmethod
    def _non_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("query is empty after trimming")
        return value


class UsageEvent(_Record):
    """One app-usage event."""

    app_id: str = Field(..., min_length=1)
    kind: EventKind


class UsageStat(_Record):
    """Foreground seconds of one app in the 24 hours before ``timestamp``."""

    app_id: str = Field(..., min_length=1)
    seconds: float = Field(..., ge=0.0)


@dataclass(frozen=True, slots=True)
class Session:
    """Maximal run of one user's items without a gap over the threshold."""

    session_id: int
    user_id: str
    items: tuple[Any, ...]
    start: int
    end: int

    def __len__(self) -> int:
        return len(self.items)


class DatasetSplit(BaseModel):
    """Train / validation / test index lists over one source list."""

    model_config = ConfigDict(frozen=True)

    name: Literal["istas_r", "istas_t", "lsapp"]
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int | None = None
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)

    @property
    def sizes(self) -> dict[str, int]:
        return {
            "train": len(self.train),
            "validation": len(self.validation),
            "test": len(self.test),
        }

    def partition(self, name: str) -> tuple[int, ...]:
        if name not in PARTITIONS:
            raise KeyError(name)
        return getattr(self, name)


PARTITIONS = ("train", "validation", "test")


@dataclass(slots=True)
class LineError:
    line: int
    message: str


@dataclass(slots=True)
class ParseReport:
    """Records parsed from one file plus the lines that failed validation."""

    path: str
    records: list[Any] = field(default_factory=list)
    errors: list[LineError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error_dicts(self) -> list[dict[str, Any]]:
        return [{"line": e.line, "message": e.message} for e in self.errors]
