"""Personalized, time-aware next-app recommendation.

The k previous apps run through a single-layer LSTM; its last hidden state is
concatenated with the user embedding and the time-bin embedding (either can
be switched off for ablations) and, optionally, with the usage-weighted app
embedding of the current time bin. A feed-forward network with a softmax
output gives a distribution over the known apps.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import structlog

from ..context.bins import NUM_BINS, time_bin
from ..context.features import recent_apps
from ..context.usage import BinUsageTable, ContextIndex
from ..dataio.instances import RecommendationInstance, build_recommendation_instances
from ..dataio.records import DatasetSplit, UsageEvent
from ..dataio.text import PAD
from ..numcore.layers import lstm_backward, lstm_forward, softmax
from ..numcore.losses import softmax_cross_entropy
from ..numcore.optim import OptimizerState, optimizer_step
from ..numcore.params import ParameterStore, glorot_init, uniform_init
from ..ranking import RankedPrediction, rank_array
from ..utils.errors import EmptyInputError, InputFormatError, ValidationFailure
from ..utils.logging import LoggerMixin
from ..utils.models import RecommendationConfig
from ..utils.seeding import substream
from .training import FeedForward, TrainingCurve, check_finite, minibatches

logger = structlog.get_logger(__name__)

PAD_ROW = 0
UNK_ROW = 1
UNKNOWN_USER_ROW = 0
RECOMMENDATION_METRIC = "mrr"

ABLATIONS: dict[str, dict[str, bool]] = {
    "full": {"use_user": True, "use_time": True},
    "no_user": {"use_user": False, "use_time": True},
    "no_time": {"use_user": True, "use_time": False},
    "no_user_no_time": {"use_user": False, "use_time": False},
}


@dataclass(slots=True)
class _Batch:
    windows: np.ndarray
    users: np.ndarray
    bins: np.ndarray
    contexts: np.ndarray | None
    labels: np.ndarray


@dataclass(slots=True)
class _ForwardCache:
    batch: _Batch
    lstm: list
    mlp: object


class NeuSA(LoggerMixin):
    """Next-app model: embeddings, LSTM, feed-forward head and softmax."""

    def __init__(
        self,
        config: RecommendationConfig,
        classes: Sequence[str],
        users: Sequence[str],
        offsets: Mapping[str, int] | None = None,
        store: ParameterStore | None = None,
    ) -> None:
        super().__init__()
        if not classes:
            raise EmptyInputError("no app occurs often enough to be predicted")
        self.config = config
        self.classes = tuple(sorted(set(classes)))
        self.class_index = {app: i for i, app in enumerate(self.classes)}
        self.app_rows = {app: i + 2 for i, app in enumerate(self.classes)}
        self.users = tuple(sorted(set(users)))
        self.user_rows = {user: i + 1 for i, user in enumerate(self.users)}
        self.offsets = dict(offsets or {})
        self.bin_table: BinUsageTable | None = None

        d, h = config.d, config.hidden_size
        n_apps = len(self.classes)
        rng = substream(config.seed, "neusa.init")
        self.store = store if store is not None else ParameterStore()
        if "app_embedding" not in self.store:
            self.store.add("app_embedding", uniform_init(rng, (n_apps + 2, d)))
            if config.use_user:
                self.store.add("user_embedding", uniform_init(rng, (len(self.users) + 1, config.d_u)))
            if config.use_time:
                self.store.add("time_embedding", uniform_init(rng, (NUM_BINS, config.d_t)))
            self.store.add("lstm.W", glorot_init(rng, 4 * h, d))
            self.store.add("lstm.U", glorot_init(rng, 4 * h, h))
            self.store.add("lstm.b", np.zeros(4 * h))
        h1, h2 = config.hidden
        self.mlp = FeedForward(self.store, "mlp", (self.input_width, h1, h2, n_apps), rng)

    @property
    def input_width(self) -> int:
        c = self.config
        return (
            c.hidden_size
            + c.d_u * c.use_user
            + c.d_t * c.use_time
            + c.d * c.bin_usage_feature
        )

    @classmethod
    def from_training(
        cls,
        train: Sequence[RecommendationInstance],
        config: RecommendationConfig,
        app_counts: Mapping[str, int] | None = None,
        offsets: Mapping[str, int] | None = None,
    ) -> NeuSA:
        """Output classes are apps seen at least ``min_app_count`` times in training.

        Without explicit counts, occurrences as a training label are counted.
        """
        if not train:
            raise EmptyInputError("no training instances")
        counts = app_counts if app_counts is not None else Counter(i.label for i in train)
        classes = [app for app, n in counts.items() if n >= config.min_app_count]
        return cls(config, classes, {i.user_id for i in train}, offsets=offsets)

    def attach_context(self, index: ContextIndex) -> None:
        """Bin-usage source for the optional bin-conditioned feature."""
        self.bin_table = BinUsageTable(index, self.offsets, same_day=self.config.same_day_bins)

    def _encode(self, instances: Sequence[RecommendationInstance]) -> _Batch:
        if not instances:
            raise EmptyInputError("no instances to encode")
        windows = np.array(
            [
                [PAD_ROW if app == PAD else self.app_rows.get(app, UNK_ROW) for app in i.window]
                for i in instances
            ],
            dtype=np.int64,
        )
        users = np.array([self.user_rows.get(i.user_id, UNKNOWN_USER_ROW) for i in instances])
        bins = np.array(
            [time_bin(i.timestamp, self.offsets.get(i.user_id, 0)).index for i in instances]
        )
        contexts = None
        if self.config.bin_usage_feature:
            if self.bin_table is None:
                raise ValidationFailure("bin usage feature needs an attached usage index")
            size = len(self.classes) + 2
            contexts = np.stack(
                [
                    self.bin_table.distribution(i.user_id, i.timestamp).vector(
                        self.app_rows, size, unk=UNK_ROW
                    )
                    for i in instances
                ]
            )
        labels = np.array([self.class_index.get(i.label, -1) for i in instances], dtype=np.int64)
        return _Batch(windows, users, bins, contexts, labels)

    def _logits(
        self,
        batch: _Batch,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, _ForwardCache]:
        store = self.store
        apps = store["app_embedding"].value
        h_last, lstm_caches = lstm_forward(
            store["lstm.W"].value, store["lstm.U"].value, store["lstm.b"].value, apps[batch.windows]
        )
        features = [h_last]
        if self.config.use_user:
            features.append(store["user_embedding"].value[batch.users])
        if self.config.use_time:
            features.append(store["time_embedding"].value[batch.bins])
        if self.config.bin_usage_feature:
            features.append(batch.contexts @ apps)
        logits, mlp_cache = self.mlp.forward(
            np.concatenate(features, axis=1), self.config.dropout, training, rng
        )
        return logits, _ForwardCache(batch, lstm_caches, mlp_cache)

    def _backward(self, cache: _ForwardCache, dlogits: np.ndarray) -> None:
        store = self.store
        c = self.config
        batch = cache.batch
        dx = self.mlp.backward(cache.mlp, dlogits)
        h = c.hidden_size
        dh, offset = dx[:, :h], h
        if c.use_user:
            np.add.at(store["user_embedding"].grad, batch.users, dx[:, offset : offset + c.d_u])
            offset += c.d_u
        if c.use_time:
            np.add.at(store["time_embedding"].grad, batch.bins, dx[:, offset : offset + c.d_t])
            offset += c.d_t
        if c.bin_usage_feature:
            store["app_embedding"].grad += batch.contexts.T @ dx[:, offset : offset + c.d]
        dW, dU, db, dxs = lstm_backward(store["lstm.W"].value, store["lstm.U"].value, cache.lstm, dh)
        store["lstm.W"].grad += dW
        store["lstm.U"].grad += dU
        store["lstm.b"].grad += db
        np.add.at(store["app_embedding"].grad, batch.windows, dxs)

    def batch_loss(
        self,
        instances: Sequence[RecommendationInstance],
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> float:
        """Cross entropy over instances with a known label; accumulates gradients."""
        kept = [i for i in instances if i.label in self.class_index]
        if not kept:
            return 0.0
        batch = self._encode(kept)
        logits, cache = self._logits(batch, training, rng)
        loss, _, dlogits = softmax_cross_entropy(logits, batch.labels)
        self._backward(cache, dlogits)
        return loss

    def predict_proba(self, instances: Sequence[RecommendationInstance]) -> np.ndarray:
        """(B, N) next-app distributions in inference mode."""
        logits, _ = self._logits(self._encode(instances))
        return softmax(logits, axis=1)

    def forward(self, instance: RecommendationInstance) -> np.ndarray:
        return self.predict_proba([instance])[0]

    def ranks(self, instances: Sequence[RecommendationInstance]) -> np.ndarray:
        """1-based rank of each label, ties by app id; 0 for labels outside the classes."""
        result = np.zeros(len(instances), dtype=np.int64)
        if not instances:
            return result
        probs = self.predict_proba(instances)
        labels = np.array([self.class_index.get(i.label, -1) for i in instances])
        known = np.flatnonzero(labels >= 0)
        if known.size:
            p = probs[known]
            target = p[np.arange(known.size), labels[known]][:, None]
            columns = np.arange(p.shape[1])[None, :]
            ahead = (p > target) | ((p == target) & (columns < labels[known][:, None]))
            result[known] = 1 + ahead.sum(axis=1)
        return result

    def rank_instances(self, instances: Sequence[RecommendationInstance]) -> list[RankedPrediction]:
        probs = self.predict_proba(instances)
        return [rank_array(self.classes, row) for row in probs]

    def validation_mrr(self, instances: Sequence[RecommendationInstance]) -> float:
        ranks = self.ranks(instances)
        if ranks.size == 0:
            return 0.0
        return float(np.mean(np.where(ranks > 0, 1.0 / np.maximum(ranks, 1), 0.0)))

    def recommend(
        self,
        user_id: str,
        t: int,
        history: Sequence[UsageEvent],
        top_k: int | None = None,
    ) -> RankedPrediction:
        """Apps by predicted probability for ``user_id`` at ``t``; ties by app id."""
        window = recent_apps(history, t, self.config.k)
        instance = RecommendationInstance(
            instance_id=f"adhoc:{user_id}:{t}",
            user_id=user_id,
            timestamp=t,
            window=window.apps,
            label=PAD,
            last_seen=None,
        )
        ranked = rank_array(self.classes, self.forward(instance))
        return ranked.top(top_k) if top_k is not None else ranked

    def fit(
        self,
        train: Sequence[RecommendationInstance],
        validation: Sequence[RecommendationInstance] = (),
    ) -> TrainingCurve:
        """Mini-batch cross entropy; keeps the epoch with the best validation MRR."""
        config = self.config
        kept = [i for i in train if i.label in self.class_index]
        if not kept:
            raise EmptyInputError("no training instance has a predictable label")
        skipped = len(train) - len(kept)
        if skipped:
            logger.warning("Skipped instances with rare labels", count=skipped)

        shuffle_rng = substream(config.seed, "neusa.shuffle")
        dropout_rng = substream(config.seed, "neusa.dropout")
        state = OptimizerState(algorithm=config.optimizer, lr=config.lr)
        curve = TrainingCurve(metric=RECOMMENDATION_METRIC)
        best = self.store.snapshot()

        self.log_operation(
            "Training recommendation model",
            instances=len(kept),
            classes=len(self.classes),
            k=config.k,
            use_user=config.use_user,
            use_time=config.use_time,
        )
        for epoch in range(1, config.epochs + 1):
            total = 0.0
            for batch_number, index in enumerate(minibatches(len(kept), config.batch, shuffle_rng)):
                batch = [kept[i] for i in index]
                loss = self.batch_loss(batch, training=True, rng=dropout_rng)
                check_finite(loss, epoch, batch_number)
                optimizer_step(self.store, state)
                total += loss * len(batch)
            mean_loss = total / len(kept)
            value = self.validation_mrr(validation) if validation else None
            if curve.record(epoch, mean_loss, value):
                best = self.store.snapshot()
            self.log_operation("Epoch finished", epoch=epoch, loss=mean_loss, mrr=value)

        self.store.restore(best)
        self.log_operation("Selected epoch", epoch=curve.best_epoch, mrr=curve.best_value)
        return curve

    def save(self, directory: Path) -> Path:
        metadata = {
            "model": "neusa",
            "config": self.config.model_dump(mode="json"),
            "seed": self.config.seed,
            "classes": list(self.classes),
            "users": list(self.users),
            "offsets": dict(sorted(self.offsets.items())),
        }
        return self.store.save(directory, metadata)

    @classmethod
    def load(cls, directory: Path) -> NeuSA:
        store, metadata = ParameterStore.load(directory)
        if metadata.get("model") != "neusa":
            raise InputFormatError("Checkpoint is not a recommendation model", path=str(directory))
        return cls(
            RecommendationConfig.model_validate(metadata["config"]),
            metadata["classes"],
            metadata["users"],
            offsets=metadata.get("offsets"),
            store=store,
        )


def ablation_config(config: RecommendationConfig, preset: str) -> RecommendationConfig:
    """Config with the user/time switches of a named ablation preset."""
    if preset not in ABLATIONS:
        raise ValidationFailure(f"Unknown ablation '{preset}'", choices=sorted(ABLATIONS))
    return config.model_copy(update=ABLATIONS[preset])


def train_events(events: Sequence[UsageEvent], split: DatasetSplit) -> list[UsageEvent]:
    return [events[i] for i in split.train]


def train_recommender(
    events: Sequence[UsageEvent],
    split: DatasetSplit,
    config: RecommendationConfig,
    offsets: Mapping[str, int] | None = None,
    min_history: int | None = None,
    context_events: Sequence[UsageEvent] | None = None,
) -> tuple[NeuSA, TrainingCurve, dict[str, list[RecommendationInstance]]]:
    """Build instances inside split segments, train and return the partitions.

    ``context_events`` feeds the bin-usage index (closes included); the
    training records are used when it is not given.
    """
    instances = build_recommendation_instances(events, split, config.k, min_history)
    training_events = train_events(events, split)
    counts = Counter(e.app_id for e in training_events)
    model = NeuSA.from_training(instances["train"], config, app_counts=counts, offsets=offsets)
    if config.bin_usage_feature:
        source = training_events if context_events is None else context_events
        model.attach_context(ContextIndex.from_events(source))
    curve = model.fit(instances["train"], instances["validation"])
    return model, curve, instances


def context_length_sweep(
    k_values: Sequence[int],
    events: Sequence[UsageEvent],
    split: DatasetSplit,
    config: RecommendationConfig,
    offsets: Mapping[str, int] | None = None,
    jobs: int = 1,
    context_events: Sequence[UsageEvent] | None = None,
) -> list[dict[str, Any]]:
    """Validation and test MRR per window length on identical instance sets.

    Every run requires ``max(k_values)`` predecessors, so smaller windows see
    exactly the same prediction instants.
    """
    if not k_values or min(k_values) < 1:
        raise ValidationFailure("window lengths must be at least 1", k_values=list(k_values))
    longest = max(k_values)

    def run(k: int) -> dict[str, Any]:
        model, curve, instances = train_recommender(
            events,
            split,
            config.model_copy(update={"k": k}),
            offsets,
            min_history=longest,
            context_events=context_events,
        )
        return {
            "k": k,
            "validation_mrr": curve.best_value,
            "test_mrr": model.validation_mrr(instances["test"]),
            "test_instances": len(instances["test"]),
        }

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(run, k_values))
    logger.info("Context length sweep finished", k_values=list(k_values))
    return rows
