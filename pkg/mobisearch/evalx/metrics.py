"""Ranking metrics for single-relevant-item instances.

Relevance is binary with exactly one relevant app per instance, so the ideal
DCG is 1 and nDCG@k reduces to 1 / log2(rank + 1) inside the cutoff. An
instance whose relevant app is missing from its ranking contributes 0 to
every metric.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..ranking import RankedPrediction

NDCG_CUTOFFS = (1, 3, 5)
RECALL_CUTOFFS = (3, 5)

Ranking = RankedPrediction | Sequence[str]


def rank_position(ranked: Ranking, relevant: str) -> int | None:
    """1-based rank of the relevant app, None when absent."""
    if isinstance(ranked, RankedPrediction):
        return ranked.rank_of(relevant)
    try:
        return list(ranked).index(relevant) + 1
    except ValueError:
        return None


def _gain(rank: int | None, k: int) -> float:
    if rank is None or rank > k:
        return 0.0
    return float(1.0 / np.log2(rank + 1.0))


def reciprocal_rank(ranked: Ranking, relevant: str) -> float:
    rank = rank_position(ranked, relevant)
    return 0.0 if rank is None else 1.0 / rank


def ndcg_at_k(ranked: Ranking, relevant: str, k: int) -> float:
    """nDCG@k of one instance."""
    return _gain(rank_position(ranked, relevant), k)


def recall_at_k(ranked: Ranking, relevant: str, k: int) -> float:
    """1.0 when the relevant app is within the top k, else 0.0."""
    rank = rank_position(ranked, relevant)
    return float(rank is not None and rank <= k)


def mrr(rankings: Sequence[Ranking], relevant: Sequence[str]) -> tuple[float, np.ndarray]:
    """Mean reciprocal rank and the per-instance reciprocal ranks."""
    per_instance = np.array(
        [reciprocal_rank(r, rel) for r, rel in zip(rankings, relevant, strict=True)],
        dtype=np.float64,
    )
    return (float(per_instance.mean()) if per_instance.size else 0.0), per_instance


@dataclass(slots=True)
class EvalResult:
    """Per-instance ranks of one system plus grouping keys for breakdowns."""

    system: str
    instance_ids: list[str]
    ranks: np.ndarray
    groups: dict[str, list[str]] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.instance_ids)

    @property
    def rr(self) -> np.ndarray:
        return np.where(self.ranks > 0, 1.0 / np.maximum(self.ranks, 1), 0.0)

    def ndcg(self, k: int) -> np.ndarray:
        inside = (self.ranks > 0) & (self.ranks <= k)
        return np.where(inside, 1.0 / np.log2(np.maximum(self.ranks, 1) + 1.0), 0.0)

    def recall(self, k: int) -> np.ndarray:
        return ((self.ranks > 0) & (self.ranks <= k)).astype(np.float64)

    def per_instance(self, metric: str) -> np.ndarray:
        """Values for "mrr"/"rr", "ndcg@k" or "recall@k"."""
        if metric in ("mrr", "rr"):
            return self.rr
        name, _, cutoff = metric.partition("@")
        if name == "ndcg":
            return self.ndcg(int(cutoff))
        if name == "recall":
            return self.recall(int(cutoff))
        raise KeyError(metric)

    def aggregates(self) -> dict[str, float]:
        def mean(values: np.ndarray) -> float:
            return float(values.mean()) if values.size else 0.0

        result = {"mrr": mean(self.rr)}
        for k in NDCG_CUTOFFS:
            result[f"ndcg@{k}"] = mean(self.ndcg(k))
        for k in RECALL_CUTOFFS:
            result[f"recall@{k}"] = mean(self.recall(k))
        return result

    def subset(self, mask: np.ndarray, system: str | None = None) -> EvalResult:
        keep = np.flatnonzero(mask)
        return EvalResult(
            system=system or self.system,
            instance_ids=[self.instance_ids[i] for i in keep],
            ranks=self.ranks[keep],
            groups={key: [values[i] for i in keep] for key, values in self.groups.items()},
            metadata=dict(self.metadata),
        )

    def to_row(self) -> dict[str, Any]:
        return {"system": self.system, "instances": len(self), **self.aggregates()}

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.to_row(),
            "metadata": self.metadata,
            "per_instance": [
                {
                    "id": instance,
                    "rank": int(rank) if rank > 0 else None,
                    **{key: values[i] for key, values in self.groups.items()},
                }
                for i, (instance, rank) in enumerate(zip(self.instance_ids, self.ranks, strict=True))
            ],
        }


def evaluate(
    system: str,
    rankings: Sequence[Ranking],
    relevant: Sequence[str],
    instance_ids: Sequence[str] | None = None,
    groups: Mapping[str, Sequence[str]] | None = None,
    metadata: Mapping[str, Any] | None = None,
) -> EvalResult:
    """Score full rankings against their relevant apps."""
    if len(rankings) != len(relevant):
        raise ValueError("rankings and relevant apps differ in length")
    ranks = np.array(
        [rank_position(r, rel) or 0 for r, rel in zip(rankings, relevant, strict=True)],
        dtype=np.int64,
    )
    ids = list(instance_ids) if instance_ids is not None else [str(i) for i in range(len(ranks))]
    return EvalResult(
        system=system,
        instance_ids=ids,
        ranks=ranks,
        groups={key: list(values) for key, values in (groups or {}).items()},
        metadata=dict(metadata or {}),
    )
