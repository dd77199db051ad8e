"""Pipeline handlers shared by the command line.

Every ``handle_*`` method validates its arguments with a request model, runs
one pipeline step, writes a manifest next to the outputs and returns an
envelope: ``{"ok": True, "data": {...}}`` or ``{"ok": False, "error": {...}}``.
"""

from __future__ import annotations

import json
import traceback
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError

from ..analysis import (
    app_share,
    context_rank_histogram,
    cooccurrence,
    descriptive_stats,
    markov_transitions,
    overlap_report,
    query_length_distribution,
    session_app_counts,
    session_overlap,
    temporal_distribution,
    write_edges,
)
from ..context.usage import ContextIndex
from ..dataio.parsing import (
    CATEGORIES_FILE,
    QUERIES_FILE,
    STATS_FILE,
    USAGE_FILE,
    USERS_FILE,
    parse_query_log,
    parse_stats_log,
    parse_usage_log,
    write_category_map,
    write_queries,
    write_stats,
    write_usage,
    write_user_offsets,
)
from ..dataio.records import DatasetSplit, ParseReport
from ..dataio.sessions import filter_top_apps, sessionize, sort_by_user_time
from ..dataio.splits import read_split, split_istas_r, split_istas_t, split_lsapp, write_split
from ..dataio.text import tokenize
from ..evalx import (
    RECOMMENDATION_ALPHA,
    SELECTION_ALPHA,
    EvalResult,
    aggregate_columns,
    aggregate_runs,
    bucket_mrr,
    delta_breakdown,
    evaluate,
    length_buckets,
    read_predictions,
    significance_table,
    write_breakdown_tsv,
    write_results_json,
    write_results_tsv,
    write_significance_tsv,
    write_tsv,
)
from ..models.cntas import CNTAS, negatives_sweep
from ..models.neusa import NeuSA, context_length_sweep
from ..numcore.params import MANIFEST_FILE
from ..settings import load_config, resolve_output
from ..syngen import generate_dataset, write_dataset
from ..utils.errors import (
    InputFormatError,
    MissingResourceError,
    MobiSearchError,
    ValidationFailure,
)
from ..utils.logging import LoggerMixin
from ..utils.manifest import dump_json, write_manifest
from ..utils.models import (
    AnalyzeRequest,
    EvalRequest,
    GeneratorSpec,
    IngestRequest,
    PredictRequest,
    RecommendationConfig,
    SelectionConfig,
    SplitRequest,
    SynthRequest,
    TrainRequest,
)
from .recommendation import (
    ablation_runs,
    evaluate_recommendation,
    load_usage_dataset,
    train_recommendation,
)
from .selection import (
    evaluate_selection,
    load_context_index,
    load_queries,
    load_query_dataset,
    read_categories,
    read_offsets,
    train_selection,
)

CHECKPOINT_DIR = "checkpoint"
MAX_REPORTED_ERRORS = 20


def checkpoint_dir(path: Path) -> Path:
    """Accept either a checkpoint directory or the train output that contains one."""
    nested = path / CHECKPOINT_DIR
    return nested if (nested / MANIFEST_FILE).is_file() else path


def checkpoint_kind(path: Path) -> str:
    manifest = checkpoint_dir(path) / MANIFEST_FILE
    if not manifest.is_file():
        raise MissingResourceError(f"Checkpoint not found: {path}", path=str(path))
    try:
        return str(json.loads(manifest.read_text(encoding="utf-8"))["model"])
    except (json.JSONDecodeError, KeyError) as exc:
        raise InputFormatError("Checkpoint manifest has no model type", path=str(path)) from exc


def split_files(path: Path) -> list[Path]:
    """One split file, or every ``*.split`` file of a directory in name order."""
    if path.is_dir():
        files = sorted(path.glob("*.split"))
        if not files:
            raise MissingResourceError(f"No split files in {path}", path=str(path))
        return files
    if not path.is_file():
        raise MissingResourceError(f"Split file not found: {path}", path=str(path))
    return [path]


class PipelineHandler(LoggerMixin):
    """Runs pipeline subcommands and wraps results in envelopes."""

    def _run(
        self,
        operation: str,
        request_model: type[BaseModel],
        arguments: dict[str, Any],
        work: Callable[[Any], dict[str, Any]],
    ) -> dict[str, Any]:
        try:
            request = request_model(**arguments)
            self.log_operation(f"Running {operation}")
            data = work(request)
            self.log_operation(f"Finished {operation}")
            return {"ok": True, "data": data}
        except MobiSearchError as e:
            self.log_operation(
                f"Failed to run {operation}", level="error", code=e.code, error=str(e)
            )
            return e.to_envelope()
        except ValidationError as e:
            self.log_operation(f"Invalid {operation} arguments", level="error", error=str(e))
            return {
                "ok": False,
                "error": {
                    "code": "VALIDATION_ERROR",
                    "message": f"Invalid {operation} arguments",
                    "details": {"errors": json.loads(e.json(include_url=False))},
                },
            }
        except Exception as e:
            self.log_operation(
                f"Unexpected failure in {operation}",
                level="error",
                error=str(e),
                traceback=traceback.format_exc(),
            )
            return {"ok": False, "error": {"code": "INTERNAL_ERROR", "message": str(e)}}

    # ingest

    def handle_ingest(self, arguments: dict[str, Any]) -> dict[str, Any]:
        """Handle the ingest subcommand."""
        return self._run("ingest", IngestRequest, arguments, self._ingest)

    def _checked(self, report: ParseReport, allow_errors: bool) -> list[Any]:
        if report.errors:
            if not allow_errors:
                raise InputFormatError(
                    f"{len(report.errors)} malformed lines in {Path(report.path).name}",
                    path=report.path,
                    errors=report.error_dicts()[:MAX_REPORTED_ERRORS],
                )
            self.log_operation(
                "Dropped malformed lines", level="warning", path=report.path, count=len(report.errors)
            )
        return report.records

    def _ingest(self, request: IngestRequest) -> dict[str, Any]:
        src, out_dir = request.data_dir, resolve_output(request.out_dir)
        if not (src / QUERIES_FILE).is_file() and not (src / USAGE_FILE).is_file():
            raise MissingResourceError(
                f"Neither {QUERIES_FILE} nor {USAGE_FILE} found in {src}", path=str(src)
            )
        written: dict[str, str] = {}
        counts: dict[str, int] = {}
        skipped: dict[str, int] = {}

        def keep(name: str, path: Path, n: int, report: ParseReport | None = None) -> None:
            written[name] = str(path)
            counts[name] = n
            if report is not None:
                skipped[name] = len(report.errors)

        if (src / QUERIES_FILE).is_file():
            report = parse_query_log(src / QUERIES_FILE)
            queries = sort_by_user_time(self._checked(report, request.allow_errors))
            keep("queries", write_queries(out_dir / QUERIES_FILE, queries), len(queries), report)
        if (src / USAGE_FILE).is_file():
            report = parse_usage_log(src / USAGE_FILE)
            events = sort_by_user_time(self._checked(report, request.allow_errors))
            if request.top_apps is not None:
                events = filter_top_apps(events, request.top_apps)
            keep("usage", write_usage(out_dir / USAGE_FILE, events), len(events), report)
        if (src / STATS_FILE).is_file():
            report = parse_stats_log(src / STATS_FILE)
            stats = sorted(
                self._checked(report, request.allow_errors),
                key=lambda s: (s.user_id, s.timestamp, s.app_id),
            )
            keep("stats", write_stats(out_dir / STATS_FILE, stats), len(stats), report)
        offsets = read_offsets(src)
        if offsets:
            keep("users", write_user_offsets(out_dir / USERS_FILE, offsets), len(offsets))
        categories = read_categories(src)
        if categories:
            path = write_category_map(out_dir / CATEGORIES_FILE, categories)
            keep("categories", path, len(categories))

        write_manifest(out_dir, "ingest", request.model_dump(mode="json"), None, [src])
        return {"out_dir": str(out_dir), "files": written, "records": counts, "skipped_lines": skipped}

    # split

    def handle_split(self, arguments: dict[str, Any]) -> dict[str, Any]:
        """Handle the split subcommand."""
        return self._run("split", SplitRequest, arguments, self._split)

    def _split(self, request: SplitRequest) -> dict[str, Any]:
        out_dir = resolve_output(request.out_dir)
        if request.strategy == "lsapp":
            records: Sequence[Any] = load_usage_dataset(request.data_dir).records
            splits = [split_lsapp(records)]
        else:
            records = load_queries(request.data_dir)
            if request.strategy == "istas_t":
                splits = [split_istas_t(records)]
            else:
                seeds = range(request.seed, request.seed + request.repeats)
                with ThreadPoolExecutor(max_workers=max(1, request.jobs)) as pool:
                    splits = list(pool.map(lambda s: split_istas_r(records, seed=s), seeds))

        written = []
        for split in splits:
            name = f"{split.name}-seed{split.seed}.split" if split.seed is not None else f"{split.name}.split"
            path = write_split(split, out_dir / name)
            written.append({"path": str(path), "seed": split.seed, "sizes": split.sizes})
        write_manifest(
            out_dir, "split", request.model_dump(mode="json"), request.seed, [request.data_dir]
        )
        return {"out_dir": str(out_dir), "records": len(records), "splits": written}

    # train

    def handle_train(self, arguments: dict[str, Any]) -> dict[str, Any]:
        """Handle the train subcommand."""
        return self._run("train", TrainRequest, arguments, self._train)

    def _train(self, request: TrainRequest) -> dict[str, Any]:
        out_dir = resolve_output(request.out_dir)
        split = read_split(request.split_path)
        extras: dict[str, Any] = {}
        if request.model == "cntas":
            config: SelectionConfig | RecommendationConfig = load_config(
                SelectionConfig, request.config_file, request.config
            )
            if request.ablations:
                raise ValidationFailure("ablation presets apply to neusa only")
            dataset = load_query_dataset(request.data_dir)
            model, curve, parts = train_selection(dataset, split, config)
            if request.sweep:
                rows = negatives_sweep(parts["train"], parts["validation"], config, request.sweep)
                write_tsv(out_dir / "sweep.tsv", ("negatives", "ndcg@3"), rows)
                extras["sweep"] = rows
        else:
            config = load_config(RecommendationConfig, request.config_file, request.config)
            usage = load_usage_dataset(request.data_dir)
            model, curve, _ = train_recommendation(usage, split, config)
            if request.sweep:
                rows = context_length_sweep(
                    request.sweep,
                    usage.records,
                    split,
                    config,
                    usage.offsets,
                    jobs=request.jobs,
                    context_events=usage.context_events(split),
                )
                columns = ("k", "validation_mrr", "test_mrr", "test_instances")
                write_tsv(out_dir / "sweep.tsv", columns, rows)
                extras["sweep"] = rows
            if request.ablations:
                rows = ablation_runs(usage, split, config)
                columns = ("preset", "validation_mrr", "test_mrr", "test_instances")
                write_tsv(out_dir / "ablations.tsv", columns, rows)
                extras["ablations"] = rows

        checkpoint = model.save(out_dir / CHECKPOINT_DIR)
        dump_json(curve.to_dict(), out_dir / "curve.json")
        effective = {**request.model_dump(mode="json"), "config": config.model_dump(mode="json")}
        write_manifest(
            out_dir, "train", effective, config.seed, [request.data_dir, request.split_path]
        )
        return {
            "out_dir": str(out_dir),
            "model": request.model,
            "checkpoint": str(checkpoint),
            "best_epoch": curve.best_epoch,
            "best_value": curve.best_value,
            "metric": curve.metric,
            **extras,
        }

    # eval

    def handle_eval(self, arguments: dict[str, Any]) -> dict[str, Any]:
        """Handle the eval subcommand."""
        return self._run("eval", EvalRequest, arguments, self._eval)

    def _alpha(self, request: EvalRequest) -> float:
        if request.alpha is not None:
            return request.alpha
        return SELECTION_ALPHA if request.task == "selection" else RECOMMENDATION_ALPHA

    def _write_results(
        self,
        out_dir: Path,
        results: Sequence[EvalResult],
        alpha: float,
        metadata: dict[str, Any],
        lengths: Sequence[int] = (),
    ) -> dict[str, Any]:
        write_results_tsv(results, out_dir / "results.tsv")
        summary: dict[str, Any] = {"systems": [r.to_row() for r in results]}
        if len(results) >= 2:
            table = significance_table(results[0], results[1:], "mrr", alpha)
            write_significance_tsv(table, out_dir / "significance.tsv")
            summary["significance"] = table.to_dict()
            for key in ("app", "user"):
                if key in results[0].groups:
                    breakdown = delta_breakdown(results[0], results[1], key)
                    write_breakdown_tsv(breakdown, out_dir / f"breakdown_{key}.tsv")
                    summary[f"improved_{key}_fraction"] = breakdown.improved_fraction
        if len(lengths) >= 3:
            rows = bucket_mrr(length_buckets(results[0].instance_ids, list(lengths)), results)
            columns = ("bucket", "count", "min_length", "max_length", *(r.system for r in results))
            write_tsv(out_dir / "length_buckets.tsv", columns, rows)
            summary["length_buckets"] = rows
        write_results_json(results, out_dir / "results.json", {**metadata, **summary})
        return summary

    def _eval(self, request: EvalRequest) -> dict[str, Any]:
        out_dir = resolve_output(request.out_dir)
        alpha = self._alpha(request)
        config = request.model_dump(mode="json")

        if request.predictions is not None:
            ids, relevant, rankings = read_predictions(request.predictions)
            metadata = {"task": request.task, "source": str(request.predictions)}
            result = evaluate("predictions", rankings, relevant, ids, metadata=metadata)
            summary = self._write_results(out_dir, [result], alpha, metadata)
            write_manifest(out_dir, "eval", config, request.seed, [request.predictions])
            return {"out_dir": str(out_dir), **summary}

        files = split_files(request.split_path)
        if len(files) > 1 and request.checkpoints:
            raise ValidationFailure("checkpoints belong to one split; pass a single split file")
        evaluate_split = self._selection_run if request.task == "selection" else self._recommendation_run
        runs: list[list[EvalResult]] = []
        splits: list[DatasetSplit] = []
        data: dict[str, Any] = {"out_dir": str(out_dir)}
        for path in files:
            split = read_split(path)
            run_dir = out_dir if len(files) == 1 else out_dir / path.stem
            results, lengths, extras = evaluate_split(request, split)
            metadata = {"task": request.task, "split": split.name, "seed": split.seed, **extras}
            summary = self._write_results(run_dir, results, alpha, metadata, lengths)
            runs.append(results)
            splits.append(split)
            data.setdefault("runs", []).append({"split": str(path), **summary})

        if len(runs) > 1:
            rows = aggregate_runs(runs)
            write_tsv(out_dir / "aggregate.tsv", aggregate_columns(), rows)
            data["aggregate"] = rows
        inputs = [request.data_dir, *files, *request.checkpoints]
        if request.embeddings is not None:
            inputs.append(request.embeddings)
        seed = splits[0].seed if splits[0].seed is not None else request.seed
        write_manifest(out_dir, "eval", config, seed, inputs)
        return data

    def _selection_run(
        self, request: EvalRequest, split: DatasetSplit
    ) -> tuple[list[EvalResult], list[int], dict[str, Any]]:
        report = evaluate_selection(
            load_query_dataset(request.data_dir),
            split,
            checkpoints=[checkpoint_dir(p) for p in request.checkpoints],
            baselines=request.baselines,
            embeddings=request.embeddings,
            oracle=request.oracle,
        )
        return report.results, report.lengths, {"tuning": report.tuning}

    def _recommendation_run(
        self, request: EvalRequest, split: DatasetSplit
    ) -> tuple[list[EvalResult], list[int], dict[str, Any]]:
        report = evaluate_recommendation(
            load_usage_dataset(request.data_dir),
            split,
            checkpoints=[checkpoint_dir(p) for p in request.checkpoints],
            baselines=request.baselines,
            oracle=request.oracle,
        )
        return report.results, [], {"min_history": report.window}

    # analyze

    def handle_analyze(self, arguments: dict[str, Any]) -> dict[str, Any]:
        """Handle the analyze subcommand."""
        return self._run("analyze", AnalyzeRequest, arguments, self._analyze)

    def _analyze(self, request: AnalyzeRequest) -> dict[str, Any]:
        src, out_dir = request.data_dir, resolve_output(request.out_dir)
        offsets = read_offsets(src)
        report: dict[str, Any] = {}

        if (src / QUERIES_FILE).is_file():
            queries = load_queries(src)
            sessions = sessionize(queries)
            by_app: dict[str, list[list[str]]] = {}
            for query in queries:
                by_app.setdefault(query.target_app, []).append(tokenize(query.query))
            overlap = overlap_report(by_app)
            lengths = query_length_distribution(by_app)
            write_tsv(out_dir / "query_overlap.tsv", tuple(overlap[0]), overlap)
            write_tsv(out_dir / "query_lengths.tsv", tuple(lengths[0]), lengths)
            section: dict[str, Any] = {
                "stats": descriptive_stats(queries, sessions),
                "session_overlap": session_overlap(sessions),
                "temporal": temporal_distribution(queries, offsets),
                "app_share": app_share([q.target_app for q in queries], request.top_n),
                "overlap": overlap,
                "lengths": lengths,
            }
            if (src / STATS_FILE).is_file() or (src / USAGE_FILE).is_file():
                index = load_context_index(src)
                histogram = context_rank_histogram(queries, index, request.max_rank)
                section["context_ranks"] = histogram.to_dict()
            report["queries"] = section

        if (src / USAGE_FILE).is_file():
            records = load_usage_dataset(src).records
            sessions = sessionize(records)
            share = app_share([r.app_id for r in records], request.top_n)
            top = [row["app"] for row in share["apps"][: request.top_n]]
            apps_model = markov_transitions(sessions, "app", threshold=request.threshold)
            write_edges(apps_model, out_dir / "transitions_app.tsv")
            categories = read_categories(src)
            if categories:
                category_model = markov_transitions(
                    sessions, "category", categories, threshold=request.threshold
                )
                write_edges(category_model, out_dir / "transitions_category.tsv")
            matrix = cooccurrence(sessions, top)
            write_tsv(out_dir / "cooccurrence.tsv", ("app", *matrix.apps), matrix.rows())
            report["usage"] = {
                "stats": descriptive_stats(records, sessions),
                "session_app_counts": session_app_counts(sessions),
                "temporal": temporal_distribution(records, offsets),
                "app_share": share,
                "edges": len(apps_model.edges()),
            }

        if not report:
            raise MissingResourceError(
                f"Neither {QUERIES_FILE} nor {USAGE_FILE} found in {src}", path=str(src)
            )
        dump_json(report, out_dir / "report.json")
        write_manifest(out_dir, "analyze", request.model_dump(mode="json"), None, [src])
        return {"out_dir": str(out_dir), "sections": sorted(report)}

    # synth

    def handle_synth(self, arguments: dict[str, Any]) -> dict[str, Any]:
        """Handle the synth subcommand."""
        return self._run("synth", SynthRequest, arguments, self._synth)

    def _synth(self, request: SynthRequest) -> dict[str, Any]:
        out_dir = resolve_output(request.out_dir)
        spec = load_config(GeneratorSpec, request.config_file, request.spec)
        dataset = generate_dataset(spec)
        paths = write_dataset(out_dir, dataset)
        effective = {**request.model_dump(mode="json"), "spec": spec.model_dump(mode="json")}
        write_manifest(out_dir, "synth", effective, spec.seed)
        return {
            "out_dir": str(out_dir),
            "files": {name: str(path) for name, path in paths.items()},
            "events": len(dataset.events),
            "queries": len(dataset.queries),
        }

    # predict

    def handle_predict(self, arguments: dict[str, Any]) -> dict[str, Any]:
        """Handle the predict subcommand."""
        return self._run("predict", PredictRequest, arguments, self._predict)

    def _predict(self, request: PredictRequest) -> dict[str, Any]:
        directory = checkpoint_dir(request.checkpoint)
        kind = checkpoint_kind(request.checkpoint)
        if kind == "cntas":
            if request.query is None:
                raise ValidationFailure("a selection checkpoint needs --query")
            model = CNTAS.load(directory)
            index = load_context_index(request.data_dir)
            context = index.distribution(request.user_id, request.timestamp, model.config.horizon)
            ranking = model.rank(tokenize(request.query), context).top(request.top_k)
        elif kind == "neusa":
            model = NeuSA.load(directory)
            usage = load_usage_dataset(request.data_dir)
            history = usage.histories().get(request.user_id, [])
            if model.config.bin_usage_feature:
                earlier = usage.events_before(request.timestamp)
                model.attach_context(ContextIndex.from_events(earlier))
            ranking = model.recommend(request.user_id, request.timestamp, history, request.top_k)
        else:
            raise InputFormatError(f"Unknown checkpoint model '{kind}'", path=str(directory))
        return {"model": kind, "user_id": request.user_id, "timestamp": request.timestamp, **ranking.to_dict()}
