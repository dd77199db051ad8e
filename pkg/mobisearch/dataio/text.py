"""Query tokenization and vocabularies."""

from __future__ import annotations

import unicodedata
from collections import Counter
from collections.abc import Iterable, Sequence

PAD = "<pad>"
UNK = "<unk>"


def _is_punctuation(char: str) -> bool:
    return unicodedata.category(char).startswith("P")


def _strip_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punctuation(token[start]):
        start += 1
    while end > start and _is_punctuation(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(query: str) -> list[str]:
    """Lowercase, split on Unicode whitespace, strip edge punctuation.

    No stemming and no stopword removal.
    """
    tokens = (_strip_punctuation(raw) for raw in query.lower().split())
    return [token for token in tokens if token]


class Vocabulary:
    """Dense token <-> id bijection with document frequencies.

    Special tokens take the lowest ids in the order given.
    """

    def __init__(
        self,
        tokens: Iterable[str] = (),
        specials: Sequence[str] = (PAD, UNK),
        doc_freq: dict[str, int] | None = None,
    ) -> None:
        self.specials = tuple(specials)
        self.id_to_token: list[str] = []
        self.token_to_id: dict[str, int] = {}
        for token in (*self.specials, *tokens):
            if token not in self.token_to_id:
                self.token_to_id[token] = len(self.id_to_token)
                self.id_to_token.append(token)
        self.doc_freq = dict(doc_freq or {})

    @classmethod
    def build(
        cls,
        documents: Iterable[Sequence[str]],
        min_count: int = 1,
        specials: Sequence[str] = (PAD, UNK),
    ) -> Vocabulary:
        """Collect tokens occurring in at least ``min_count`` documents, sorted."""
        doc_freq: Counter[str] = Counter()
        for tokens in documents:
            doc_freq.update(set(tokens))
        kept = sorted(t for t, n in doc_freq.items() if n >= min_count and t not in specials)
        return cls(kept, specials=specials, doc_freq={t: doc_freq[t] for t in kept})

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: object) -> bool:
        return token in self.token_to_id

    @property
    def unk_id(self) -> int | None:
        return self.token_to_id.get(UNK)

    @property
    def pad_id(self) -> int | None:
        return self.token_to_id.get(PAD)

    def lookup(self, token: str) -> int:
        """Id of ``token``; unknown tokens map to UNK when the vocabulary has it."""
        found = self.token_to_id.get(token)
        if found is not None:
            return found
        if self.unk_id is None:
            raise KeyError(token)
        return self.unk_id

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.lookup(token) for token in tokens]

    def to_dict(self) -> dict[str, object]:
        return {
            "specials": list(self.specials),
            "tokens": self.id_to_token[len(self.specials) :],
            "doc_freq": self.doc_freq,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, object]) -> Vocabulary:
        return cls(
            payload["tokens"],  # type: ignore[arg-type]
            specials=payload["specials"],  # type: ignore[arg-type]
            doc_freq=payload.get("doc_freq"),  # type: ignore[arg-type]
        )


def build_vocabulary(
    token_lists: Iterable[Sequence[str]],
    min_count: int = 1,
    specials: Sequence[str] = (PAD, UNK),
) -> Vocabulary:
    return Vocabulary.build(token_lists, min_count=min_count, specials=specials)
