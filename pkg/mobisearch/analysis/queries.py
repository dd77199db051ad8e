"""Query-term overlap and query-length distributions."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np
from sklearn.feature_extraction.text import CountVectorizer

OVERLAP_THRESHOLDS = (0.25, 0.5, 0.75)
ALL = "All"
_BLOCK = 1024


def _identity(tokens: Sequence[str]) -> Sequence[str]:
    return tokens


def query_overlap(q1: Sequence[str], q2: Sequence[str]) -> float:
    """Jaccard similarity of the two term sets; 0.0 when both are empty."""
    a, b = set(q1), set(q2)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def max_other_overlap(queries: Sequence[Sequence[str]]) -> np.ndarray:
    """For every query, the largest Jaccard similarity to any other query in the pool."""
    n = len(queries)
    best = np.zeros(n)
    if n < 2 or not any(queries):
        return best
    matrix = CountVectorizer(analyzer=_identity, lowercase=False, binary=True).fit_transform(
        [list(q) for q in queries]
    )
    matrix = matrix.tocsr().astype(np.float64)
    sizes = np.asarray(matrix.sum(axis=1)).ravel()
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        inter = (matrix[start:stop] @ matrix.T).toarray()
        union = sizes[start:stop, None] + sizes[None, :] - inter
        sim = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
        sim[np.arange(stop - start), np.arange(start, stop)] = -1.0
        best[start:stop] = sim.max(axis=1)
    return np.maximum(best, 0.0)


def _overlap_row(
    label: str, queries: Sequence[Sequence[str]], thresholds: Sequence[float]
) -> dict[str, Any]:
    best = max_other_overlap(queries)
    row: dict[str, Any] = {"app": label, "queries": len(queries)}
    for tau in thresholds:
        row[f"tau>{tau}"] = float(100.0 * np.mean(best > tau)) if len(queries) else 0.0
    return row


def overlap_report(
    queries_by_app: Mapping[str, Sequence[Sequence[str]]],
    thresholds: Sequence[float] = OVERLAP_THRESHOLDS,
) -> list[dict[str, Any]]:
    """Percentage of queries with another query above each threshold.

    Per-app rows compare queries of the same app; the All row pools every query.
    """
    rows = [_overlap_row(app, queries_by_app[app], thresholds) for app in sorted(queries_by_app)]
    pooled = [q for app in sorted(queries_by_app) for q in queries_by_app[app]]
    rows.append(_overlap_row(ALL, pooled, thresholds))
    return rows


def _length_row(label: str, queries: Sequence[Sequence[str]]) -> dict[str, Any]:
    lengths = np.array([len(q) for q in queries])
    row: dict[str, Any] = {"app": label, "queries": len(queries)}
    total = max(len(queries), 1)
    for n in (1, 2, 3, 4):
        row[str(n)] = float(np.sum(lengths == n) / total)
    row[">4"] = float(np.sum(lengths > 4) / total)
    row["mean_terms"] = float(lengths.mean()) if lengths.size else 0.0
    return row


def query_length_distribution(
    queries_by_app: Mapping[str, Sequence[Sequence[str]]],
) -> list[dict[str, Any]]:
    """Share of queries with 1, 2, 3, 4 and more than 4 terms, per app and for All."""
    rows = [_length_row(app, queries_by_app[app]) for app in sorted(queries_by_app)]
    rows.append(_length_row(ALL, [q for app in sorted(queries_by_app) for q in queries_by_app[app]]))
    return rows
