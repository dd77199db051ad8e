"""Term-matching rankers over app documents built from training queries.

Each candidate app is represented by the concatenation of the training
queries that targeted it. Scores come from Dirichlet-smoothed query
likelihood or BM25 over the resulting term-count matrix.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from sklearn.feature_extraction.text import CountVectorizer

from ..ranking import RankedPrediction, rank_array
from ..utils.errors import EmptyInputError


def _identity(tokens: Sequence[str]) -> Sequence[str]:
    return tokens


@dataclass(frozen=True, slots=True)
class AppDocument:
    """All training-query tokens that targeted one app."""

    app_id: str
    tokens: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.tokens)

    @property
    def term_counts(self) -> Counter[str]:
        return Counter(self.tokens)


def build_app_documents(pairs: Iterable[tuple[Sequence[str], str]]) -> dict[str, AppDocument]:
    """Aggregate (query tokens, target app) pairs into one document per app."""
    grouped: dict[str, list[str]] = {}
    for tokens, app in pairs:
        grouped.setdefault(app, []).extend(tokens)
    return {app: AppDocument(app, tuple(tokens)) for app, tokens in sorted(grouped.items())}


class _TermIndex:
    """Apps x terms count matrix."""

    def __init__(self, documents: Mapping[str, AppDocument]) -> None:
        if not any(doc.tokens for doc in documents.values()):
            raise EmptyInputError("app documents contain no terms")
        self.apps = tuple(sorted(documents))
        vectorizer = CountVectorizer(analyzer=_identity, lowercase=False)
        self.matrix = vectorizer.fit_transform(
            [documents[app].tokens for app in self.apps]
        ).tocsc()
        self.columns: dict[str, int] = vectorizer.vocabulary_
        self.lengths = np.asarray(self.matrix.sum(axis=1), dtype=np.float64).ravel()
        self.collection_counts = np.asarray(self.matrix.sum(axis=0), dtype=np.float64).ravel()
        self.doc_freq = np.asarray((self.matrix > 0).sum(axis=0), dtype=np.float64).ravel()

    def tf(self, term: str) -> np.ndarray | None:
        column = self.columns.get(term)
        if column is None:
            return None
        return self.matrix[:, column].toarray().ravel().astype(np.float64)


class QueryLikelihoodRanker:
    """Dirichlet-smoothed query likelihood.

    score(a) = sum over query terms w of count(w, q) * ln((tf(w, a) + mu p(w|C)) / (|a| + mu)).
    Terms absent from the whole collection are skipped.
    """

    def __init__(self, documents: Mapping[str, AppDocument], mu: float = 2000.0) -> None:
        self.index = _TermIndex(documents)
        self.mu = mu
        self.total = float(self.index.collection_counts.sum())

    @property
    def apps(self) -> tuple[str, ...]:
        return self.index.apps

    def scores(self, tokens: Sequence[str]) -> np.ndarray:
        result = np.zeros(len(self.index.apps))
        for term, qtf in Counter(tokens).items():
            tf = self.index.tf(term)
            if tf is None:
                continue
            p_collection = self.index.collection_counts[self.index.columns[term]] / self.total
            result += qtf * np.log((tf + self.mu * p_collection) / (self.index.lengths + self.mu))
        return result

    def rank(self, tokens: Sequence[str]) -> RankedPrediction:
        return rank_array(self.index.apps, self.scores(tokens))


class BM25Ranker:
    """Okapi BM25 with idf = ln((N - df + 0.5) / (df + 0.5) + 1)."""

    def __init__(
        self,
        documents: Mapping[str, AppDocument],
        k1: float = 1.2,
        b: float = 0.75,
    ) -> None:
        self.index = _TermIndex(documents)
        self.k1 = k1
        self.b = b
        n_docs = len(self.index.apps)
        self.idf = np.log((n_docs - self.index.doc_freq + 0.5) / (self.index.doc_freq + 0.5) + 1.0)
        self.avgdl = float(self.index.lengths.mean())

    @property
    def apps(self) -> tuple[str, ...]:
        return self.index.apps

    def scores(self, tokens: Sequence[str]) -> np.ndarray:
        result = np.zeros(len(self.index.apps))
        norm = self.k1 * (1.0 - self.b + self.b * self.index.lengths / self.avgdl)
        for term, qtf in Counter(tokens).items():
            tf = self.index.tf(term)
            if tf is None:
                continue
            idf = self.idf[self.index.columns[term]]
            result += qtf * idf * tf * (self.k1 + 1.0) / (tf + norm)
        return result

    def rank(self, tokens: Sequence[str]) -> RankedPrediction:
        return rank_array(self.index.apps, self.scores(tokens))
