"""Context-aware target-app selection.

A query is represented as a softmax-weighted sum of its term embeddings, an
app by its own embedding and the user's usage context as the time-weighted
sum of a second, separate app matrix. The scorer is a feed-forward network
over the element-wise products and absolute differences of (query, app) and
(context, app); it is trained pointwise with MSE (linear head) or pairwise
with a hinge loss (sigmoid head).
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..context.usage import UsageContextDistribution
from ..dataio.text import PAD, UNK, Vocabulary
from ..evalx.metrics import ndcg_at_k
from ..numcore.layers import sigmoid
from ..numcore.losses import hinge_pair, hinge_pair_grad, mse, mse_grad
from ..numcore.optim import OptimizerState, optimizer_step
from ..numcore.params import ParameterStore, uniform_init
from ..ranking import RankedPrediction, rank_array
from ..utils.errors import EmptyInputError, InputFormatError, ValidationFailure
from ..utils.logging import LoggerMixin
from ..utils.models import SelectionConfig
from ..utils.seeding import substream
from .training import FeedForward, TrainingCurve, check_finite, minibatches

UNK_ROW = 0
SELECTION_METRIC = "ndcg@3"
NEGATIVE_SWEEP = (1, 2, 4, 8)


@dataclass(frozen=True, slots=True)
class SelectionExample:
    """One logged query with its target app and usage context."""

    instance_id: str
    user_id: str
    timestamp: int
    tokens: tuple[str, ...]
    target: str
    context: UsageContextDistribution


@dataclass(frozen=True, slots=True)
class SelectionInstance:
    """A (query, context, candidate app) triple labelled 1 iff the candidate is the target."""

    tokens: tuple[str, ...]
    user_id: str
    timestamp: int
    candidate: str
    label: float
    context: UsageContextDistribution

    @classmethod
    def of(cls, example: SelectionExample, candidate: str) -> SelectionInstance:
        return cls(
            tokens=example.tokens,
            user_id=example.user_id,
            timestamp=example.timestamp,
            candidate=candidate,
            label=1.0 if candidate == example.target else 0.0,
            context=example.context,
        )


@dataclass(slots=True)
class _Inputs:
    ids: np.ndarray
    mask: np.ndarray
    contexts: np.ndarray


@dataclass(slots=True)
class _ScoreCache:
    inputs: _Inputs
    rows: np.ndarray
    alpha: np.ndarray
    terms: np.ndarray
    phi_q: np.ndarray
    phi_a: np.ndarray
    phi_c: np.ndarray
    mlp: object
    head: np.ndarray


class CNTAS(LoggerMixin):
    """Query/context/app scorer with its parameters and vocabularies."""

    def __init__(
        self,
        config: SelectionConfig,
        vocab: Vocabulary,
        apps: Sequence[str],
        candidates: Sequence[str] | None = None,
        user_apps: dict[str, Sequence[str]] | None = None,
        store: ParameterStore | None = None,
    ) -> None:
        super().__init__()
        if vocab.pad_id is None or vocab.unk_id is None:
            raise ValidationFailure("query vocabulary needs PAD and UNK entries")
        self.config = config
        self.vocab = vocab
        self.apps = tuple(sorted(set(apps)))
        self.app_index = {app: row + 1 for row, app in enumerate(self.apps)}
        self.candidates = tuple(sorted(set(candidates))) if candidates else self.apps
        self.user_apps = {user: tuple(sorted(set(a))) for user, a in (user_apps or {}).items()}

        d = config.d
        rows = len(self.apps) + 1
        rng = substream(config.seed, "cntas.init")
        self.store = store if store is not None else ParameterStore()
        if "term_embedding" not in self.store:
            self.store.add("term_embedding", uniform_init(rng, (len(vocab), d)))
            self.store.add("term_weight", uniform_init(rng, (len(vocab),)))
            self.store.add("app_embedding", uniform_init(rng, (rows, d)))
            self.store.add(
                "context_app_embedding",
                uniform_init(rng, (rows, d)),
                trainable=config.use_context,
            )
        h1, h2 = config.hidden
        self.mlp = FeedForward(self.store, "mlp", (4 * d, h1, h2, 1), rng)

    @classmethod
    def from_examples(cls, examples: Sequence[SelectionExample], config: SelectionConfig) -> CNTAS:
        """Vocabulary, app rows and candidates from training examples.

        Candidates are the training targets and always get a row. Context apps
        and query terms seen fewer than ``min_count`` times map to the shared
        UNK rows, which are trained on them.
        """
        if not examples:
            raise EmptyInputError("no training queries")
        vocab = Vocabulary.build(
            (e.tokens for e in examples), min_count=config.min_count, specials=(PAD, UNK)
        )
        targets = {e.target for e in examples}
        seen = Counter(e.target for e in examples)
        seen.update(app for e in examples for app, s in e.context.seconds.items() if s > 0.0)
        context_apps = {app for app, n in seen.items() if n >= config.min_count}
        user_apps: dict[str, set[str]] = {}
        for example in examples:
            user_apps.setdefault(example.user_id, set()).add(example.target)
        return cls(
            config,
            vocab,
            sorted(targets | context_apps),
            candidates=sorted(targets),
            user_apps={u: sorted(a) for u, a in user_apps.items()},
        )

    @property
    def pairwise(self) -> bool:
        return self.config.loss == "pairwise"

    def _row(self, app: str) -> int:
        return self.app_index.get(app, UNK_ROW)

    def _inputs(
        self,
        token_lists: Sequence[Sequence[str]],
        contexts: Sequence[UsageContextDistribution],
    ) -> _Inputs:
        encoded = [self.vocab.encode(tokens) for tokens in token_lists]
        width = max((len(e) for e in encoded), default=0) or 1
        ids = np.full((len(encoded), width), self.vocab.pad_id, dtype=np.int64)
        mask = np.zeros((len(encoded), width), dtype=bool)
        for i, token_ids in enumerate(encoded):
            ids[i, : len(token_ids)] = token_ids
            mask[i, : len(token_ids)] = True
        n_rows = len(self.apps) + 1
        if self.config.use_context:
            vectors = np.stack([c.vector(self.app_index, n_rows, unk=UNK_ROW) for c in contexts])
        else:
            vectors = np.zeros((len(encoded), n_rows))
        return _Inputs(ids, mask, vectors)

    def _forward(
        self,
        inputs: _Inputs,
        rows: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, _ScoreCache]:
        weights = self.store["term_weight"].value[inputs.ids]
        masked = np.where(inputs.mask, weights, -np.inf)
        peak = np.max(masked, axis=1, keepdims=True)
        peak = np.where(np.isfinite(peak), peak, 0.0)
        expw = np.where(inputs.mask, np.exp(weights - peak), 0.0)
        total = expw.sum(axis=1, keepdims=True)
        alpha = np.divide(expw, total, out=np.zeros_like(expw), where=total > 0.0)

        terms = self.store["term_embedding"].value[inputs.ids]
        phi_q = np.einsum("bl,bld->bd", alpha, terms)
        phi_a = self.store["app_embedding"].value[rows]
        phi_c = inputs.contexts @ self.store["context_app_embedding"].value

        x = np.concatenate(
            [phi_q * phi_a, np.abs(phi_q - phi_a), phi_c * phi_a, np.abs(phi_c - phi_a)],
            axis=1,
        )
        out, mlp_cache = self.mlp.forward(x, self.config.dropout, training, rng)
        head = out[:, 0]
        if self.pairwise:
            head = sigmoid(head)
        cache = _ScoreCache(inputs, rows, alpha, terms, phi_q, phi_a, phi_c, mlp_cache, head)
        return head, cache

    def _backward(self, cache: _ScoreCache, dhead: np.ndarray) -> None:
        if self.pairwise:
            dhead = dhead * cache.head * (1.0 - cache.head)
        dx = self.mlp.backward(cache.mlp, dhead[:, None])
        g1, g2, g3, g4 = np.split(dx, 4, axis=1)
        sq = np.sign(cache.phi_q - cache.phi_a)
        sc = np.sign(cache.phi_c - cache.phi_a)

        dphi_q = g1 * cache.phi_a + g2 * sq
        dphi_a = g1 * cache.phi_q - g2 * sq + g3 * cache.phi_c - g4 * sc
        dphi_c = g3 * cache.phi_a + g4 * sc

        np.add.at(self.store["app_embedding"].grad, cache.rows, dphi_a)
        if self.config.use_context:
            self.store["context_app_embedding"].grad += cache.inputs.contexts.T @ dphi_c

        ids = cache.inputs.ids
        dterms = cache.alpha[:, :, None] * dphi_q[:, None, :]
        np.add.at(self.store["term_embedding"].grad, ids, dterms)
        dalpha = np.einsum("bld,bd->bl", cache.terms, dphi_q)
        dweights = cache.alpha * (dalpha - np.sum(cache.alpha * dalpha, axis=1, keepdims=True))
        np.add.at(self.store["term_weight"].grad, ids, dweights * cache.inputs.mask)

    def represent_query(self, tokens: Sequence[str]) -> np.ndarray:
        """Softmax-weighted sum of the term embeddings; OOV terms use the UNK row."""
        if not tokens:
            raise EmptyInputError("query has no tokens")
        ids = np.asarray(self.vocab.encode(tokens))
        weights = self.store["term_weight"].value[ids]
        alpha = np.exp(weights - weights.max())
        alpha /= alpha.sum()
        return alpha @ self.store["term_embedding"].value[ids]

    def score(self, tokens: Sequence[str], app: str, context: UsageContextDistribution) -> float:
        inputs = self._inputs([tokens], [context])
        head, _ = self._forward(inputs, np.array([self._row(app)]))
        return float(head[0])

    def candidates_for(self, user_id: str | None = None) -> tuple[str, ...]:
        if self.config.user_candidates and user_id is not None and user_id in self.user_apps:
            return self.user_apps[user_id]
        return self.candidates

    def rank(
        self,
        tokens: Sequence[str],
        context: UsageContextDistribution,
        candidates: Sequence[str] | None = None,
    ) -> RankedPrediction:
        """Candidates by descending score, ties by ascending app id."""
        apps = list(candidates) if candidates is not None else list(self.candidates_for(context.user_id))
        if not apps:
            raise ValidationFailure("candidate set is empty")
        inputs = self._inputs([tokens], [context])
        repeated = _Inputs(
            np.repeat(inputs.ids, len(apps), axis=0),
            np.repeat(inputs.mask, len(apps), axis=0),
            np.repeat(inputs.contexts, len(apps), axis=0),
        )
        head, _ = self._forward(repeated, np.array([self._row(a) for a in apps]))
        return rank_array(apps, head)

    def rank_many(self, examples: Sequence[SelectionExample]) -> list[RankedPrediction]:
        return [self.rank(e.tokens, e.context) for e in examples]

    def pointwise_loss(
        self,
        instances: Sequence[SelectionInstance],
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> float:
        """MSE over the instances; accumulates gradients into the store."""
        inputs = self._inputs([i.tokens for i in instances], [i.context for i in instances])
        rows = np.array([self._row(i.candidate) for i in instances])
        labels = np.array([i.label for i in instances])
        head, cache = self._forward(inputs, rows, training, rng)
        self._backward(cache, mse_grad(labels, head))
        return mse(labels, head)

    def pairwise_loss(
        self,
        pairs: Sequence[tuple[SelectionInstance, SelectionInstance]],
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> float:
        """Hinge loss over (target, non-target) pairs; accumulates gradients."""
        flat = [p[0] for p in pairs] + [p[1] for p in pairs]
        for first, second in pairs:
            if first.label == second.label:
                raise ValidationFailure("pair members must have different labels")
        inputs = self._inputs([i.tokens for i in flat], [i.context for i in flat])
        rows = np.array([self._row(i.candidate) for i in flat])
        head, cache = self._forward(inputs, rows, training, rng)
        n = len(pairs)
        y1 = np.array([p[0].label for p in pairs])
        y2 = np.array([p[1].label for p in pairs])
        d1, d2 = hinge_pair_grad(y1, y2, head[:n], head[n:])
        self._backward(cache, np.concatenate([d1, d2]))
        return hinge_pair(y1, y2, head[:n], head[n:])

    def _negatives(self, example: SelectionExample, rng: np.random.Generator) -> list[str]:
        pool = [app for app in self.candidates if app != example.target]
        if not pool:
            return []
        m = self.config.negatives
        picked = rng.choice(len(pool), size=m, replace=len(pool) < m)
        return [pool[i] for i in picked]

    def validation_score(self, examples: Sequence[SelectionExample]) -> float:
        if not examples:
            return 0.0
        rankings = self.rank_many(examples)
        return float(np.mean([ndcg_at_k(r, e.target, 3) for r, e in zip(rankings, examples, strict=True)]))

    def fit(
        self,
        train: Sequence[SelectionExample],
        validation: Sequence[SelectionExample] = (),
    ) -> TrainingCurve:
        """Train with sampled negatives; keeps the epoch with the best validation nDCG@3."""
        if not train:
            raise EmptyInputError("no training queries")
        config = self.config
        negative_rng = substream(config.seed, "cntas.negatives")
        shuffle_rng = substream(config.seed, "cntas.shuffle")
        dropout_rng = substream(config.seed, "cntas.dropout")
        state = OptimizerState(algorithm=config.optimizer, lr=config.lr)
        curve = TrainingCurve(metric=SELECTION_METRIC)
        best = self.store.snapshot()

        self.log_operation(
            "Training selection model",
            loss=config.loss,
            examples=len(train),
            candidates=len(self.candidates),
            use_context=config.use_context,
        )
        for epoch in range(1, config.epochs + 1):
            if self.pairwise:
                units: list = [
                    (SelectionInstance.of(e, e.target), SelectionInstance.of(e, neg))
                    for e in train
                    for neg in self._negatives(e, negative_rng)
                ]
            else:
                units = []
                for e in train:
                    units.append(SelectionInstance.of(e, e.target))
                    units.extend(SelectionInstance.of(e, neg) for neg in self._negatives(e, negative_rng))
            if not units:
                raise EmptyInputError("pairwise training needs at least two candidate apps")

            losses: list[float] = []
            for batch_number, index in enumerate(minibatches(len(units), config.batch, shuffle_rng)):
                batch = [units[i] for i in index]
                if self.pairwise:
                    loss = self.pairwise_loss(batch, training=True, rng=dropout_rng)
                else:
                    loss = self.pointwise_loss(batch, training=True, rng=dropout_rng)
                check_finite(loss, epoch, batch_number)
                optimizer_step(self.store, state)
                losses.append(loss * len(batch))

            mean_loss = float(np.sum(losses) / len(units))
            value = self.validation_score(validation) if validation else None
            if curve.record(epoch, mean_loss, value):
                best = self.store.snapshot()
            self.log_operation("Epoch finished", epoch=epoch, loss=mean_loss, ndcg3=value)

        self.store.restore(best)
        self.log_operation("Selected epoch", epoch=curve.best_epoch, ndcg3=curve.best_value)
        return curve

    def save(self, directory: Path) -> Path:
        metadata = {
            "model": "cntas",
            "config": self.config.model_dump(mode="json"),
            "seed": self.config.seed,
            "vocab": self.vocab.to_dict(),
            "apps": list(self.apps),
            "candidates": list(self.candidates),
            "user_apps": {u: list(a) for u, a in sorted(self.user_apps.items())},
        }
        return self.store.save(directory, metadata)

    @classmethod
    def load(cls, directory: Path) -> CNTAS:
        store, metadata = ParameterStore.load(directory)
        if metadata.get("model") != "cntas":
            raise InputFormatError("Checkpoint is not a selection model", path=str(directory))
        return cls(
            SelectionConfig.model_validate(metadata["config"]),
            Vocabulary.from_dict(metadata["vocab"]),
            metadata["apps"],
            candidates=metadata["candidates"],
            user_apps=metadata.get("user_apps"),
            store=store,
        )


def train_pointwise(
    train: Sequence[SelectionExample],
    config: SelectionConfig,
    validation: Sequence[SelectionExample] = (),
) -> tuple[CNTAS, TrainingCurve]:
    model = CNTAS.from_examples(train, config.model_copy(update={"loss": "pointwise"}))
    return model, model.fit(train, validation)


def train_pairwise(
    train: Sequence[SelectionExample],
    config: SelectionConfig,
    validation: Sequence[SelectionExample] = (),
) -> tuple[CNTAS, TrainingCurve]:
    model = CNTAS.from_examples(train, config.model_copy(update={"loss": "pairwise"}))
    return model, model.fit(train, validation)


def negatives_sweep(
    train: Sequence[SelectionExample],
    validation: Sequence[SelectionExample],
    config: SelectionConfig,
    values: Sequence[int] = NEGATIVE_SWEEP,
) -> list[dict[str, float]]:
    """Validation nDCG@3 for each number of sampled negatives."""
    rows = []
    for m in values:
        model = CNTAS.from_examples(train, config.model_copy(update={"negatives": m}))
        curve = model.fit(train, validation)
        rows.append({"negatives": m, SELECTION_METRIC: curve.best_value or 0.0})
    return rows
