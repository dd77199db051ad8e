"""Next-app recommendation runs over deduplicated usage records."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import structlog

from ..baselines.static import app_counts, mfu_rank, mru_rank
from ..context.usage import ContextIndex
from ..dataio.instances import RecommendationInstance, build_recommendation_instances
from ..dataio.parsing import USAGE_FILE, parse_usage_log
from ..dataio.records import DatasetSplit, EventKind, UsageEvent
from ..dataio.sessions import sort_by_user_time, usage_records
from ..evalx.metrics import EvalResult, evaluate
from ..models.neusa import ABLATIONS, NeuSA, ablation_config, train_events, train_recommender
from ..models.training import TrainingCurve
from ..ranking import RankedPrediction
from ..syngen.oracle import bayes_oracle
from ..syngen.writer import load_ground_truth
from ..utils.errors import ValidationFailure
from ..utils.models import RecommendationConfig
from .selection import read_offsets, require_clean

logger = structlog.get_logger(__name__)

RECOMMENDATION_BASELINES = ("mfu", "mru")


@dataclass(slots=True)
class UsageDataset:
    """Deduplicated app-usage records in (user, timestamp) order.

    ``events`` keeps every parsed event, closes included, in the same order;
    foreground-time contexts are built from it.
    """

    records: list[UsageEvent]
    offsets: dict[str, int] = field(default_factory=dict)
    data_dir: Path | None = None
    events: list[UsageEvent] = field(default_factory=list)

    def check(self, split: DatasetSplit) -> None:
        if max((*split.train, *split.validation, *split.test), default=-1) >= len(self.records):
            raise ValidationFailure(
                "split refers to records outside the dataset", records=len(self.records)
            )

    def histories(self) -> dict[str, list[UsageEvent]]:
        per_user: dict[str, list[UsageEvent]] = defaultdict(list)
        for record in self.records:
            per_user[record.user_id].append(record)
        return dict(per_user)

    def context_events(self, split: DatasetSplit) -> list[UsageEvent]:
        """Raw events up to each user's last training record.

        The close that ends the last training interval is kept. Without raw
        events the training records themselves are used.
        """
        training = train_events(self.records, split)
        if not self.events:
            return training
        cutoff: dict[str, int] = {}
        for record in training:
            previous = cutoff.get(record.user_id, record.timestamp)
            cutoff[record.user_id] = max(previous, record.timestamp)
        selected: list[UsageEvent] = []
        for event in self.events:
            limit = cutoff.get(event.user_id)
            if limit is None:
                continue
            if event.timestamp <= limit:
                selected.append(event)
            elif (
                event.kind == EventKind.CLOSE
                and selected
                and selected[-1].user_id == event.user_id
                and selected[-1].app_id == event.app_id
                and selected[-1].timestamp <= limit
                and selected[-1].kind != EventKind.CLOSE
            ):
                selected.append(event)
        return selected

    def events_before(self, t: int) -> list[UsageEvent]:
        """Raw events (records when there are none) strictly before ``t``."""
        return [e for e in (self.events or self.records) if e.timestamp < t]

    def attach_context(self, model: NeuSA, split: DatasetSplit) -> None:
        if model.config.bin_usage_feature:
            model.attach_context(ContextIndex.from_events(self.context_events(split)))


def load_usage_dataset(data_dir: Path) -> UsageDataset:
    events = sort_by_user_time(require_clean(parse_usage_log(data_dir / USAGE_FILE)))
    return UsageDataset(usage_records(events), read_offsets(data_dir), data_dir, events)


def train_recommendation(
    dataset: UsageDataset,
    split: DatasetSplit,
    config: RecommendationConfig,
) -> tuple[NeuSA, TrainingCurve, dict[str, list[RecommendationInstance]]]:
    dataset.check(split)
    return train_recommender(
        dataset.records, split, config, dataset.offsets, context_events=dataset.context_events(split)
    )


def ablation_runs(
    dataset: UsageDataset,
    split: DatasetSplit,
    config: RecommendationConfig,
    presets: Sequence[str] = tuple(ABLATIONS),
) -> list[dict[str, Any]]:
    """Validation and test MRR of each ablation preset."""
    dataset.check(split)
    rows = []
    for preset in presets:
        model, curve, instances = train_recommender(
            dataset.records,
            split,
            ablation_config(config, preset),
            dataset.offsets,
            context_events=dataset.context_events(split),
        )
        rows.append(
            {
                "preset": preset,
                "validation_mrr": curve.best_value,
                "test_mrr": model.validation_mrr(instances["test"]),
                "test_instances": len(instances["test"]),
            }
        )
    return rows


@dataclass(slots=True)
class RecommendationReport:
    results: list[EvalResult]
    window: int


def _label(model: NeuSA, taken: set[str]) -> str:
    config = model.config
    label = "neusa"
    if not config.use_user:
        label += "-nouser"
    if not config.use_time:
        label += "-notime"
    label += f"-k{config.k}"
    candidate, n = label, 2
    while candidate in taken:
        candidate = f"{label}#{n}"
        n += 1
    return candidate


def evaluate_recommendation(
    dataset: UsageDataset,
    split: DatasetSplit,
    checkpoints: Sequence[Path] = (),
    baselines: Sequence[str] = (),
    oracle: bool = False,
    min_history: int | None = None,
) -> RecommendationReport:
    """Score systems on one shared set of test instants.

    Every system sees the instants that have ``min_history`` predecessors in
    their test segment; by default that is the longest window among the
    checkpoints (9 when there are none).
    """
    dataset.check(split)
    models = [NeuSA.load(path) for path in checkpoints]
    for model in models:
        dataset.attach_context(model, split)
    needed = min_history or max((m.config.k for m in models), default=RecommendationConfig().k)
    metadata = {"task": "recommendation", "split": split.name, "seed": split.seed, "min_history": needed}

    def instances_for(k: int) -> list[RecommendationInstance]:
        return build_recommendation_instances(dataset.records, split, k, needed)["test"]

    shared = instances_for(needed)
    if not shared:
        raise ValidationFailure("test partition has no instances", min_history=needed)
    ids = [i.instance_id for i in shared]
    labels = [i.label for i in shared]
    groups = {"app": labels, "user": [i.user_id for i in shared]}

    def scored(system: str, rankings: Sequence[RankedPrediction]) -> EvalResult:
        logger.info("Evaluated system", system=system, instances=len(rankings))
        return evaluate(system, rankings, labels, ids, groups, metadata)

    results: list[EvalResult] = []
    for model in models:
        label = _label(model, {r.system for r in results})
        instances = shared if model.config.k == needed else instances_for(model.config.k)
        results.append(scored(label, model.rank_instances(instances)))

    mfu = mfu_rank(app_counts(e.app_id for e in train_events(dataset.records, split)))
    histories = dataset.histories()
    for name in baselines:
        if name == "mfu":
            results.append(scored(name, [mfu] * len(shared)))
        elif name == "mru":
            rankings = [mru_rank(histories[i.user_id], i.timestamp, mfu) for i in shared]
            results.append(scored(name, rankings))
        else:
            raise ValidationFailure(
                f"Unknown recommendation baseline '{name}'", choices=list(RECOMMENDATION_BASELINES)
            )

    if oracle:
        if dataset.data_dir is None:
            raise ValidationFailure("the oracle needs the dataset directory")
        truth = load_ground_truth(dataset.data_dir)
        window = max(truth.order, needed)
        instances = shared if window == needed else instances_for(window)
        results.append(
            scored("oracle", [bayes_oracle(truth, i, dataset.offsets) for i in instances])
        )

    if not results:
        raise ValidationFailure("nothing to evaluate: give checkpoints, baselines or --oracle")
    return RecommendationReport(results, needed)
