"""Readers and writers for the tab-separated log formats.

Every file is UTF-8, tab-separated and starts with a header line. Readers
validate each data line with the record models and collect failures with
their 1-based line numbers instead of dropping them.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

import structlog
from pydantic import BaseModel, ValidationError

from ..utils.errors import InputFormatError, MissingResourceError
from .records import LineError, ParseReport, QueryRecord, UsageEvent, UsageStat

logger = structlog.get_logger(__name__)

QUERY_COLUMNS = ("user_id", "timestamp", "query", "target_app")
USAGE_COLUMNS = ("user_id", "timestamp", "app_id", "kind")
STATS_COLUMNS = ("user_id", "snapshot_timestamp", "app_id", "seconds_in_past_24h")
STATS_FIELDS = ("user_id", "timestamp", "app_id", "seconds")
USER_COLUMNS = ("user_id", "utc_offset")
CATEGORY_COLUMNS = ("app_id", "category")

QUERIES_FILE = "queries.tsv"
USAGE_FILE = "usage.tsv"
STATS_FILE = "stats.tsv"
USERS_FILE = "users.tsv"
CATEGORIES_FILE = "categories.tsv"

INVALID_UTF8 = "line is not valid UTF-8"


def _decode(raw: bytes) -> str | None:
    try:
        return raw.decode("utf-8").rstrip("\r\n")
    except UnicodeDecodeError:
        return None


def _read_lines(path: Path, columns: tuple[str, ...]) -> Iterable[tuple[int, list[str] | None]]:
    """Yield (line number, fields); fields is None for a line that is not valid UTF-8."""
    if not path.is_file():
        raise MissingResourceError(f"File not found: {path}", path=str(path))
    with path.open("rb") as handle:
        header = _decode(handle.readline())
        if header is None:
            raise InputFormatError(f"Header of {path.name} is not valid UTF-8", path=str(path))
        names = tuple(n.strip() for n in header.split("\t"))
        if names != columns:
            raise InputFormatError(
                f"Malformed header in {path.name}",
                path=str(path),
                expected=list(columns),
                found=list(names),
            )
        for number, raw in enumerate(handle, start=2):
            line = _decode(raw)
            if line is None:
                yield number, None
            elif line.strip():
                yield number, line.split("\t")


def _parse(
    path: Path,
    columns: tuple[str, ...],
    model: type[BaseModel],
    fields_as: tuple[str, ...] | None = None,
) -> ParseReport:
    names = fields_as or columns
    report = ParseReport(path=str(path))
    for number, fields in _read_lines(path, columns):
        if fields is None:
            report.errors.append(LineError(number, INVALID_UTF8))
            continue
        if len(fields) != len(columns):
            report.errors.append(
                LineError(number, f"expected {len(columns)} fields, found {len(fields)}")
            )
            continue
        try:
            report.records.append(model.model_validate(dict(zip(names, fields, strict=True))))
        except ValidationError as exc:
            message = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
            )
            report.errors.append(LineError(number, message))
    if report.errors:
        logger.warning(
            "Rejected lines while parsing",
            path=str(path),
            accepted=len(report.records),
            rejected=len(report.errors),
        )
    else:
        logger.debug("Parsed file", path=str(path), records=len(report.records))
    return report


def parse_query_log(path: Path) -> ParseReport:
    """Parse queries.tsv into QueryRecord objects."""
    return _parse(Path(path), QUERY_COLUMNS, QueryRecord)


def parse_usage_log(path: Path) -> ParseReport:
    """Parse usage.tsv into UsageEvent objects."""
    return _parse(Path(path), USAGE_COLUMNS, UsageEvent)


def parse_stats_log(path: Path) -> ParseReport:
    """Parse stats.tsv into UsageStat snapshots."""
    return _parse(Path(path), STATS_COLUMNS, UsageStat, STATS_FIELDS)


def _parse_pairs(
    path: Path, columns: tuple[str, str]
) -> tuple[dict[str, tuple[int, str]], list[LineError]]:
    pairs: dict[str, tuple[int, str]] = {}
    errors: list[LineError] = []
    for number, fields in _read_lines(Path(path), columns):
        if fields is None:
            errors.append(LineError(number, INVALID_UTF8))
            continue
        if len(fields) != 2 or not fields[0]:
            errors.append(LineError(number, "expected 2 non-empty fields"))
            continue
        pairs[fields[0]] = (number, fields[1])
    return pairs, errors


def parse_category_map(path: Path) -> dict[str, str]:
    """app_id -> category; malformed lines raise."""
    pairs, errors = _parse_pairs(path, CATEGORY_COLUMNS)
    if errors:
        raise InputFormatError(
            f"Malformed category map {Path(path).name}",
            errors=[{"line": e.line, "message": e.message} for e in errors],
        )
    return {app: category for app, (_, category) in pairs.items()}


def parse_user_offsets(path: Path) -> dict[str, int]:
    """user_id -> UTC offset in seconds."""
    pairs, errors = _parse_pairs(path, USER_COLUMNS)
    offsets: dict[str, int] = {}
    for user, (number, raw) in pairs.items():
        try:
            offsets[user] = int(raw)
        except ValueError:
            errors.append(LineError(number, f"offset of user '{user}' is not an integer"))
    if errors:
        raise InputFormatError(
            f"Malformed user table {Path(path).name}",
            errors=[{"line": e.line, "message": e.message} for e in errors],
        )
    return offsets


def _format(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write(path: Path, columns: tuple[str, ...], rows: Iterable[Iterable[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("\t".join(columns) + "\n")
        for row in rows:
            handle.write("\t".join(_format(v) for v in row) + "\n")
    return path


def write_queries(path: Path, records: Iterable[QueryRecord]) -> Path:
    return _write(
        path, QUERY_COLUMNS, ((r.user_id, r.timestamp, r.query, r.target_app) for r in records)
    )


def write_usage(path: Path, events: Iterable[UsageEvent]) -> Path:
    return _write(
        path, USAGE_COLUMNS, ((e.user_id, e.timestamp, e.app_id, e.kind.value) for e in events)
    )


def write_stats(path: Path, stats: Iterable[UsageStat]) -> Path:
    return _write(
        path, STATS_COLUMNS, ((s.user_id, s.timestamp, s.app_id, s.seconds) for s in stats)
    )


def write_user_offsets(path: Path, offsets: Mapping[str, int]) -> Path:
    return _write(path, USER_COLUMNS, sorted(offsets.items()))


def write_category_map(path: Path, categories: Mapping[str, str]) -> Path:
    return _write(path, CATEGORY_COLUMNS, sorted(categories.items()))
