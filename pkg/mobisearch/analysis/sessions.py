"""Session-level analyses: app transitions, co-occurrence and overlap."""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Any, Literal

import numpy as np

from ..dataio.records import Session
from ..dataio.text import tokenize
from ..evalx.reporting import write_tsv
from .queries import query_overlap

START = "START"
UNKNOWN_CATEGORY = "Unknown"
EDGE_THRESHOLD = 0.05


def item_app(item: Any) -> str:
    """App of a usage record or target app of a query record."""
    app = getattr(item, "app_id", None)
    return app if app is not None else item.target_app


@dataclass(frozen=True, slots=True)
class TransitionModel:
    states: tuple[str, ...]
    counts: np.ndarray
    threshold: float

    @property
    def probs(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, totals, out=np.zeros_like(self.counts), where=totals > 0)

    def probability(self, src: str, dst: str) -> float:
        return float(self.probs[self.states.index(src), self.states.index(dst)])

    def edges(self) -> list[tuple[str, str, float]]:
        """(src, dst, p) with p strictly above the threshold."""
        probs = self.probs
        rows, cols = np.nonzero(probs > self.threshold)
        return [(self.states[r], self.states[c], float(probs[r, c])) for r, c in zip(rows, cols, strict=True)]


def markov_transitions(
    sessions: Sequence[Session],
    level: Literal["app", "category"] = "app",
    categories: Mapping[str, str] | None = None,
    threshold: float = EDGE_THRESHOLD,
) -> TransitionModel:
    """Transition counts over consecutive items of each session plus START -> first."""

    def state(item: Any) -> str:
        app = item_app(item)
        if level == "category":
            return (categories or {}).get(app, UNKNOWN_CATEGORY)
        return app

    sequences = [[state(item) for item in session.items] for session in sessions if session.items]
    states = (START, *sorted({s for seq in sequences for s in seq}))
    position = {s: i for i, s in enumerate(states)}
    counts = np.zeros((len(states), len(states)))
    for seq in sequences:
        counts[position[START], position[seq[0]]] += 1
        for src, dst in zip(seq, seq[1:], strict=False):
            counts[position[src], position[dst]] += 1
    return TransitionModel(states, counts, threshold)


def write_edges(model: TransitionModel, path: Path) -> Path:
    return write_tsv(
        path,
        ("src", "dst", "probability"),
        ({"src": s, "dst": d, "probability": p} for s, d, p in model.edges()),
    )


@dataclass(frozen=True, slots=True)
class CooccurrenceMatrix:
    apps: tuple[str, ...]
    counts: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total > 0 else self.counts.copy()

    @property
    def display(self) -> np.ndarray:
        """Normalized matrix with the diagonal set to zero."""
        view = self.normalized.copy()
        np.fill_diagonal(view, 0.0)
        return view

    def rows(self) -> list[dict[str, Any]]:
        view = self.display
        return [{"app": app, **dict(zip(self.apps, map(float, view[i]), strict=True))} for i, app in enumerate(self.apps)]


def cooccurrence(sessions: Sequence[Session], apps: Sequence[str] | None = None) -> CooccurrenceMatrix:
    """Each session adds 1 for every distinct app (diagonal) and every unordered pair.

    ``apps`` restricts the matrix, e.g. to the most used apps.
    """
    present = [sorted({item_app(item) for item in session.items}) for session in sessions]
    names = tuple(sorted(apps)) if apps is not None else tuple(sorted({a for s in present for a in s}))
    index = {app: i for i, app in enumerate(names)}
    counts = np.zeros((len(names), len(names)))
    for distinct in present:
        kept = [index[a] for a in distinct if a in index]
        for i in kept:
            counts[i, i] += 1
        for i, j in combinations(kept, 2):
            counts[i, j] += 1
            counts[j, i] += 1
    return CooccurrenceMatrix(names, counts)


def session_overlap(sessions: Sequence[Session], tau: float = 0.25) -> dict[str, Any]:
    """Share of queries with a similar query (Jaccard > tau) in the same session.

    Sessions with fewer than two queries are ignored; sessions are split by
    whether all their queries target one app.
    """
    totals = {"single_app": [0, 0], "multi_app": [0, 0]}
    for session in sessions:
        if len(session.items) < 2:
            continue
        key = "single_app" if len({item_app(q) for q in session.items}) == 1 else "multi_app"
        tokens = [tokenize(q.query) for q in session.items]
        for i, query in enumerate(tokens):
            similar = any(query_overlap(query, other) > tau for j, other in enumerate(tokens) if j != i)
            totals[key][0] += int(similar)
            totals[key][1] += 1
    return {
        key: {"queries": n, "overlap_pct": 100.0 * hits / n if n else 0.0}
        for key, (hits, n) in totals.items()
    }


def session_app_counts(sessions: Sequence[Session]) -> dict[int, float]:
    """Fraction of sessions by number of distinct apps."""
    counts = Counter(len({item_app(item) for item in s.items}) for s in sessions)
    total = sum(counts.values())
    return {n: counts[n] / total for n in sorted(counts)} if total else {}
