"""Nearest-neighbor rankers over training queries.

An app's score is the sum of cosine similarities of the K training queries
closest to the test query that targeted it. Equal scores fall back to MFU
order.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np
import structlog
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import cosine_similarity

from ..ranking import RankedPrediction, rank_scores
from ..utils.errors import EmptyInputError, InputFormatError, MissingResourceError

logger = structlog.get_logger(__name__)

DEFAULT_NEIGHBORS = 10


def _identity(tokens: Sequence[str]) -> Sequence[str]:
    return tokens


class EmbeddingTable:
    """Pre-trained token vectors; missing tokens map to the zero vector."""

    def __init__(self, vectors: Mapping[str, np.ndarray]) -> None:
        dims = {np.asarray(v).shape for v in vectors.values()}
        if len(dims) > 1:
            raise InputFormatError("embedding vectors differ in dimension", shapes=sorted(map(str, dims)))
        self.vectors = {token: np.asarray(v, dtype=np.float64) for token, v in vectors.items()}
        self.dim = next(iter(dims))[0] if dims else 0

    @classmethod
    def load(cls, path: Path, dim: int | None = None) -> EmbeddingTable:
        """Read ``token v1 ... vd`` lines."""
        if not path.is_file():
            raise MissingResourceError(f"Embedding file not found: {path}", path=str(path))
        vectors: dict[str, np.ndarray] = {}
        with path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    continue
                try:
                    values = np.array([float(v) for v in parts[1:]])
                except ValueError as exc:
                    raise InputFormatError(
                        "non-numeric embedding value", path=str(path), line=line_number
                    ) from exc
                if dim is not None and values.size != dim:
                    raise InputFormatError(
                        "embedding has the wrong dimension",
                        path=str(path),
                        line=line_number,
                        expected=dim,
                        found=int(values.size),
                    )
                vectors[parts[0]] = values
        table = cls(vectors)
        logger.info("Loaded embeddings", path=str(path), tokens=len(vectors), dim=table.dim)
        return table

    def __contains__(self, token: object) -> bool:
        return token in self.vectors

    def lookup(self, token: str) -> np.ndarray:
        found = self.vectors.get(token)
        return found if found is not None else np.zeros(self.dim)

    def average(self, tokens: Sequence[str]) -> np.ndarray:
        """Mean token vector; misses count as zero vectors."""
        if not tokens:
            return np.zeros(self.dim)
        return np.mean([self.lookup(token) for token in tokens], axis=0)


class _NeighborRanker:
    def __init__(
        self,
        labels: Sequence[str],
        tie_order: Sequence[str] | None,
        k: int,
    ) -> None:
        if not labels:
            raise EmptyInputError("no training queries")
        self.labels = np.asarray(labels, dtype=object)
        self.apps = tuple(sorted(set(labels)))
        self.tie_order = tuple(tie_order) if tie_order is not None else None
        self.k = k

    def _similarities(self, tokens: Sequence[str]) -> np.ndarray:
        raise NotImplementedError

    def rank(self, tokens: Sequence[str], k: int | None = None) -> RankedPrediction:
        k = self.k if k is None else k
        sims = self._similarities(tokens)
        nearest = np.argsort(-sims, kind="stable")[:k]
        scores = dict.fromkeys(self.apps, 0.0)
        for i in nearest:
            scores[self.labels[i]] += float(sims[i])
        return rank_scores(scores, tie_order=self.tie_order)


class KNNTfidfRanker(_NeighborRanker):
    """Cosine similarity between TF-IDF vectors of queries."""

    def __init__(
        self,
        queries: Sequence[Sequence[str]],
        labels: Sequence[str],
        tie_order: Sequence[str] | None = None,
        k: int = DEFAULT_NEIGHBORS,
    ) -> None:
        super().__init__(labels, tie_order, k)
        self.vectorizer = TfidfVectorizer(analyzer=_identity, lowercase=False)
        self.matrix = self.vectorizer.fit_transform(list(queries))

    def _similarities(self, tokens: Sequence[str]) -> np.ndarray:
        query = self.vectorizer.transform([list(tokens)])
        return cosine_similarity(self.matrix, query).ravel()


class KNNEmbeddingRanker(_NeighborRanker):
    """Cosine similarity between average word embeddings of queries."""

    def __init__(
        self,
        queries: Sequence[Sequence[str]],
        labels: Sequence[str],
        table: EmbeddingTable,
        tie_order: Sequence[str] | None = None,
        k: int = DEFAULT_NEIGHBORS,
    ) -> None:
        super().__init__(labels, tie_order, k)
        self.table = table
        self.matrix = np.stack([table.average(q) for q in queries])

    def _similarities(self, tokens: Sequence[str]) -> np.ndarray:
        query = self.table.average(tokens)[None, :]
        return cosine_similarity(self.matrix, query).ravel()
