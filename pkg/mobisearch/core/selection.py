"""Target-app selection runs: datasets, baselines, checkpoints and the oracle."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import structlog

from ..baselines.contextual import context_filter_cr, tune_interpolation, tune_neighbors
from ..baselines.lexical import BM25Ranker, QueryLikelihoodRanker, build_app_documents
from ..baselines.neighbors import EmbeddingTable, KNNEmbeddingRanker, KNNTfidfRanker
from ..baselines.static import app_counts, mfu_rank
from ..context.usage import DAY, ContextIndex
from ..dataio.parsing import (
    CATEGORIES_FILE,
    QUERIES_FILE,
    STATS_FILE,
    USAGE_FILE,
    USERS_FILE,
    parse_category_map,
    parse_query_log,
    parse_stats_log,
    parse_usage_log,
    parse_user_offsets,
)
from ..dataio.records import DatasetSplit, ParseReport, QueryRecord
from ..dataio.sessions import sort_by_user_time
from ..dataio.text import tokenize
from ..evalx.metrics import EvalResult, evaluate
from ..models.cntas import CNTAS, SelectionExample
from ..models.training import TrainingCurve
from ..ranking import RankedPrediction
from ..syngen.oracle import bayes_oracle
from ..syngen.writer import load_ground_truth
from ..utils.errors import InputFormatError, ValidationFailure
from ..utils.models import SelectionConfig

logger = structlog.get_logger(__name__)

SELECTION_BASELINES = ("mfu", "querylm", "bm25", "knn", "knn_awe")
CONTEXT_SUFFIX = "-cr"
DEFAULT_LAMBDA = 0.5


def require_clean(report: ParseReport) -> list[Any]:
    """Records of a parse report; downstream runs refuse files with bad lines."""
    if not report.ok:
        raise InputFormatError(
            f"{len(report.errors)} malformed lines in {Path(report.path).name}",
            path=report.path,
            errors=report.error_dicts()[:20],
        )
    return report.records


def read_offsets(data_dir: Path) -> dict[str, int]:
    path = data_dir / USERS_FILE
    return parse_user_offsets(path) if path.is_file() else {}


def read_categories(data_dir: Path) -> dict[str, str]:
    path = data_dir / CATEGORIES_FILE
    return parse_category_map(path) if path.is_file() else {}


def load_context_index(data_dir: Path) -> ContextIndex:
    """Snapshots from stats.tsv when present, otherwise intervals from usage.tsv."""
    if (data_dir / STATS_FILE).is_file():
        return ContextIndex.from_stats(require_clean(parse_stats_log(data_dir / STATS_FILE)))
    if (data_dir / USAGE_FILE).is_file():
        events = sort_by_user_time(require_clean(parse_usage_log(data_dir / USAGE_FILE)))
        return ContextIndex.from_events(events)
    logger.warning("No usage data found; usage contexts are empty", data_dir=str(data_dir))
    return ContextIndex()


@dataclass(slots=True)
class QueryDataset:
    """Query records in (user, timestamp) order with their usage-context lookup."""

    queries: list[QueryRecord]
    index: ContextIndex
    offsets: dict[str, int] = field(default_factory=dict)
    data_dir: Path | None = None

    def examples(self, indices: Sequence[int], horizon: int = DAY) -> list[SelectionExample]:
        examples = []
        for i in indices:
            record = self.queries[i]
            examples.append(
                SelectionExample(
                    instance_id=f"q{i}",
                    user_id=record.user_id,
                    timestamp=record.timestamp,
                    tokens=tuple(tokenize(record.query)),
                    target=record.target_app,
                    context=self.index.distribution(record.user_id, record.timestamp, horizon),
                )
            )
        return examples

    def partitions(
        self, split: DatasetSplit, horizon: int = DAY
    ) -> dict[str, list[SelectionExample]]:
        if max((*split.train, *split.validation, *split.test), default=-1) >= len(self.queries):
            raise ValidationFailure(
                "split refers to queries outside the dataset", queries=len(self.queries)
            )
        return {
            "train": self.examples(split.train, horizon),
            "validation": self.examples(split.validation, horizon),
            "test": self.examples(split.test, horizon),
        }


def load_queries(data_dir: Path) -> list[QueryRecord]:
    return sort_by_user_time(require_clean(parse_query_log(data_dir / QUERIES_FILE)))


def load_query_dataset(data_dir: Path) -> QueryDataset:
    return QueryDataset(
        queries=load_queries(data_dir),
        index=load_context_index(data_dir),
        offsets=read_offsets(data_dir),
        data_dir=data_dir,
    )


def train_selection(
    dataset: QueryDataset, split: DatasetSplit, config: SelectionConfig
) -> tuple[CNTAS, TrainingCurve, dict[str, list[SelectionExample]]]:
    parts = dataset.partitions(split, config.horizon)
    if not parts["train"]:
        raise ValidationFailure("training partition is empty", split=split.name)
    model = CNTAS.from_examples(parts["train"], config)
    curve = model.fit(parts["train"], parts["validation"])
    return model, curve, parts


@dataclass(slots=True)
class SelectionReport:
    results: list[EvalResult]
    tuning: dict[str, Any]
    lengths: list[int]


Ranker = Callable[[SelectionExample], RankedPrediction]


class _BaselineFactory:
    """Builds the query rankers on the training partition and tunes them on validation."""

    def __init__(
        self,
        train: Sequence[SelectionExample],
        validation: Sequence[SelectionExample],
        embeddings: Path | None = None,
    ) -> None:
        if not train:
            raise ValidationFailure("baselines need a non-empty training partition")
        self.train = train
        self.validation = validation
        self.embeddings = embeddings
        self.mfu = mfu_rank(app_counts(e.target for e in train))
        self.tuning: dict[str, Any] = {}

    def _tune_k(self, name: str, ranker: KNNTfidfRanker | KNNEmbeddingRanker) -> None:
        if not self.validation:
            return
        k, table = tune_neighbors(
            ranker.rank,
            [e.tokens for e in self.validation],
            [e.target for e in self.validation],
        )
        ranker.k = k
        self.tuning[name] = {"k": k, "grid": table}

    def build(self, name: str) -> Ranker:
        tokens = [e.tokens for e in self.train]
        labels = [e.target for e in self.train]
        if name == "mfu":
            mfu = self.mfu
            return lambda example: mfu
        if name == "querylm":
            ranker = QueryLikelihoodRanker(build_app_documents(zip(tokens, labels, strict=True)))
            return lambda example: ranker.rank(example.tokens)
        if name == "bm25":
            bm25 = BM25Ranker(build_app_documents(zip(tokens, labels, strict=True)))
            return lambda example: bm25.rank(example.tokens)
        if name == "knn":
            knn = KNNTfidfRanker(tokens, labels, tie_order=self.mfu.apps)
            self._tune_k(name, knn)
            return lambda example: knn.rank(example.tokens)
        if name == "knn_awe":
            if self.embeddings is None:
                raise ValidationFailure("knn_awe needs --embeddings")
            table = EmbeddingTable.load(self.embeddings)
            awe = KNNEmbeddingRanker(tokens, labels, table, tie_order=self.mfu.apps)
            self._tune_k(name, awe)
            return lambda example: awe.rank(example.tokens)
        raise ValidationFailure(f"Unknown selection baseline '{name}'", choices=list(SELECTION_BASELINES))

    def with_context(self, name: str, base: Ranker) -> Ranker:
        if self.validation:
            lam, table = tune_interpolation(
                [base(e) for e in self.validation],
                [e.context for e in self.validation],
                [e.target for e in self.validation],
            )
        else:
            logger.warning("No validation queries; using the default weight", baseline=name)
            lam, table = DEFAULT_LAMBDA, []
        self.tuning[name + CONTEXT_SUFFIX] = {"lambda": lam, "grid": table}
        return lambda example: context_filter_cr(base(example), example.context, lam)


def checkpoint_label(model: CNTAS, taken: set[str]) -> str:
    label = f"cntas-{model.config.loss}"
    if not model.config.use_context:
        label += "-noctx"
    candidate, n = label, 2
    while candidate in taken:
        candidate = f"{label}#{n}"
        n += 1
    return candidate


def evaluate_selection(
    dataset: QueryDataset,
    split: DatasetSplit,
    checkpoints: Sequence[Path] = (),
    baselines: Sequence[str] = (),
    embeddings: Path | None = None,
    oracle: bool = False,
    horizon: int = DAY,
) -> SelectionReport:
    """Score every requested system on the test partition of ``split``."""
    parts = dataset.partitions(split, horizon)
    test = parts["test"]
    if not test:
        raise ValidationFailure("test partition is empty", split=split.name)
    groups = {"app": [e.target for e in test], "user": [e.user_id for e in test]}
    metadata = {"task": "selection", "split": split.name, "seed": split.seed}
    ids = [e.instance_id for e in test]
    targets = [e.target for e in test]

    def scored(system: str, rankings: Sequence[RankedPrediction]) -> EvalResult:
        logger.info("Evaluated system", system=system, instances=len(rankings))
        return evaluate(system, rankings, targets, ids, groups, metadata)

    results: list[EvalResult] = []
    for path in checkpoints:
        model = CNTAS.load(path)
        label = checkpoint_label(model, {r.system for r in results})
        results.append(scored(label, model.rank_many(test)))

    factory = _BaselineFactory(parts["train"], parts["validation"], embeddings)
    built: dict[str, Ranker] = {}
    for name in baselines:
        base_name = name.removesuffix(CONTEXT_SUFFIX)
        if base_name not in built:
            built[base_name] = factory.build(base_name)
        ranker = built[base_name]
        if name.endswith(CONTEXT_SUFFIX):
            ranker = factory.with_context(base_name, ranker)
        results.append(scored(name, [ranker(e) for e in test]))

    if oracle:
        if dataset.data_dir is None:
            raise ValidationFailure("the oracle needs the dataset directory")
        truth = load_ground_truth(dataset.data_dir)
        results.append(scored("oracle", [bayes_oracle(truth, e) for e in test]))

    if not results:
        raise ValidationFailure("nothing to evaluate: give checkpoints, baselines or --oracle")
    return SelectionReport(results, factory.tuning, [len(e.tokens) for e in test])
