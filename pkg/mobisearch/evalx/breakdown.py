"""Per-group MRR differences and query-length buckets."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..utils.errors import ValidationFailure
from .metrics import EvalResult

BUCKET_LABELS = ("Short", "Med.", "Long")


@dataclass(slots=True)
class BreakdownTable:
    key: str
    system_a: str
    system_b: str
    rows: list[dict[str, Any]] = field(default_factory=list)

    @property
    def improved_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return sum(1 for row in self.rows if row["delta"] > 0.0) / len(self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "system_a": self.system_a,
            "system_b": self.system_b,
            "improved_fraction": self.improved_fraction,
            "rows": self.rows,
        }


def delta_breakdown(a: EvalResult, b: EvalResult, key: str) -> BreakdownTable:
    """MRR(a) - MRR(b) per value of grouping ``key``, largest delta first."""
    if a.instance_ids != b.instance_ids:
        raise ValidationFailure("results cover different instances", a=a.system, b=b.system)
    if key not in a.groups:
        raise ValidationFailure(f"results carry no '{key}' grouping", available=sorted(a.groups))
    members: dict[str, list[int]] = defaultdict(list)
    for i, group in enumerate(a.groups[key]):
        members[group].append(i)

    rr_a, rr_b = a.rr, b.rr
    table = BreakdownTable(key, a.system, b.system)
    for group, index in members.items():
        mrr_a = float(rr_a[index].mean())
        mrr_b = float(rr_b[index].mean())
        table.rows.append(
            {"group": group, "count": len(index), "mrr_a": mrr_a, "mrr_b": mrr_b, "delta": mrr_a - mrr_b}
        )
    table.rows.sort(key=lambda row: (-row["delta"], row["group"]))
    return table


@dataclass(frozen=True, slots=True)
class LengthBucket:
    label: str
    instance_ids: tuple[str, ...]
    min_length: int
    max_length: int


def length_buckets(instance_ids: Sequence[str], lengths: Sequence[int]) -> list[LengthBucket]:
    """Three evenly sized buckets by token count; remainders go to earlier buckets.

    Equal lengths keep input order.
    """
    n = len(instance_ids)
    if n != len(lengths):
        raise ValidationFailure("instance ids and lengths differ in size")
    if n < 3:
        raise ValidationFailure("length buckets need at least three queries", n=n)
    order = sorted(range(n), key=lambda i: (lengths[i], i))
    base, extra = divmod(n, 3)
    buckets = []
    start = 0
    for position, label in enumerate(BUCKET_LABELS):
        size = base + (1 if position < extra else 0)
        chosen = order[start : start + size]
        start += size
        buckets.append(
            LengthBucket(
                label=label,
                instance_ids=tuple(instance_ids[i] for i in chosen),
                min_length=lengths[chosen[0]],
                max_length=lengths[chosen[-1]],
            )
        )
    return buckets


def bucket_mrr(buckets: Sequence[LengthBucket], results: Sequence[EvalResult]) -> list[dict[str, Any]]:
    """One row per bucket with the MRR of every system inside it."""
    rows = []
    for bucket in buckets:
        wanted = set(bucket.instance_ids)
        row: dict[str, Any] = {
            "bucket": bucket.label,
            "count": len(bucket.instance_ids),
            "min_length": bucket.min_length,
            "max_length": bucket.max_length,
        }
        for result in results:
            mask = np.array([i in wanted for i in result.instance_ids], dtype=bool)
            row[result.system] = float(result.rr[mask].mean()) if mask.any() else 0.0
        rows.append(row)
    return rows
