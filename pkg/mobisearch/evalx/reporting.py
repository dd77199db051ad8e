"""TSV and JSON outputs of evaluation runs."""

from __future__ import annotations

import json
from collections import defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from ..utils.errors import InputFormatError, MissingResourceError
from ..utils.manifest import dump_json
from .breakdown import BreakdownTable
from .metrics import NDCG_CUTOFFS, RECALL_CUTOFFS, EvalResult
from .significance import SignificanceTable

METRIC_COLUMNS = (
    "mrr",
    *(f"ndcg@{k}" for k in NDCG_CUTOFFS),
    *(f"recall@{k}" for k in RECALL_CUTOFFS),
)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float | np.floating):
        return f"{float(value):.6f}"
    return str(value)


def write_tsv(path: Path, columns: Sequence[str], rows: Iterable[dict[str, Any]]) -> Path:
    """Rows as tab-separated values; floats with six decimals."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("\t".join(columns) + "\n")
        for row in rows:
            handle.write("\t".join(_cell(row.get(column)) for column in columns) + "\n")
    return path


def write_results_tsv(results: Sequence[EvalResult], path: Path) -> Path:
    return write_tsv(path, ("system", "instances", *METRIC_COLUMNS), (r.to_row() for r in results))


def write_results_json(
    results: Sequence[EvalResult],
    path: Path,
    metadata: dict[str, Any] | None = None,
) -> Path:
    dump_json({"metadata": metadata or {}, "systems": [r.to_dict() for r in results]}, path)
    return path


def write_significance_tsv(table: SignificanceTable, path: Path) -> Path:
    columns = (
        "system",
        "reference_mean",
        "system_mean",
        "delta",
        "t",
        "p",
        "threshold",
        "significant",
        "degenerate",
    )
    return write_tsv(path, columns, table.rows)


def write_breakdown_tsv(table: BreakdownTable, path: Path) -> Path:
    return write_tsv(path, ("group", "count", "mrr_a", "mrr_b", "delta"), table.rows)


def aggregate_runs(runs: Sequence[Sequence[EvalResult]]) -> list[dict[str, Any]]:
    """Mean and population sd of every aggregate across repeated runs, per system."""
    collected: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for run in runs:
        for result in run:
            for metric, value in result.aggregates().items():
                collected[result.system][metric].append(value)
    rows = []
    for system in sorted(collected):
        row: dict[str, Any] = {"system": system, "runs": len(collected[system]["mrr"])}
        for metric in METRIC_COLUMNS:
            values = np.asarray(collected[system][metric])
            row[f"{metric}_mean"] = float(values.mean())
            row[f"{metric}_sd"] = float(values.std())
        rows.append(row)
    return rows


def aggregate_columns() -> tuple[str, ...]:
    return ("system", "runs", *(f"{m}_{s}" for m in METRIC_COLUMNS for s in ("mean", "sd")))


def read_predictions(path: Path) -> tuple[list[str], list[str], list[list[str]]]:
    """JSON lines with ``id``, ``relevant`` and ``ranking`` (app ids, best first)."""
    if not path.is_file():
        raise MissingResourceError(f"Predictions file not found: {path}", path=str(path))
    ids: list[str] = []
    relevant: list[str] = []
    rankings: list[list[str]] = []
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                ids.append(str(record["id"]))
                relevant.append(str(record["relevant"]))
                rankings.append([str(app) for app in record["ranking"]])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputFormatError(
                    "invalid prediction line", path=str(path), line=line_number, reason=str(exc)
                ) from exc
    return ids, relevant, rankings
