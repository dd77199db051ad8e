"""Train / validation / test splitting.

``istas_r`` is a seeded uniform partition of all records. ``istas_t`` and
``lsapp`` are per-user chronological splits: each user's earliest records go
to train, then validation, then test.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import structlog

from ..utils.errors import (
    EmptyInputError,
    InputFormatError,
    MissingResourceError,
    ValidationFailure,
)
from ..utils.seeding import substream
from .records import PARTITIONS, DatasetSplit

logger = structlog.get_logger(__name__)

DEFAULT_RATIOS = (0.7, 0.1, 0.2)
_EPS = 1e-9


def _check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationFailure(
            "Split ratios must be three non-negative numbers summing to 1",
            ratios=list(ratios),
        )
    return (float(ratios[0]), float(ratios[1]), float(ratios[2]))


def split_istas_r(
    records: Sequence[Any],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> DatasetSplit:
    """Uniformly random partition; identical for identical seeds."""
    r_train, r_valid, _ = _check_ratios(ratios)
    n = len(records)
    if n == 0:
        raise EmptyInputError("Cannot split an empty record list")
    order = substream(seed, "split.istas_r").permutation(n)
    n_train = math.floor(r_train * n + _EPS)
    n_valid = math.floor(r_valid * n + _EPS)
    split = DatasetSplit(
        name="istas_r",
        train=tuple(sorted(int(i) for i in order[:n_train])),
        validation=tuple(sorted(int(i) for i in order[n_train : n_train + n_valid])),
        test=tuple(sorted(int(i) for i in order[n_train + n_valid :])),
        seed=seed,
        ratios=(r_train, r_valid, 1.0 - r_train - r_valid),
    )
    logger.info("Built random split", seed=seed, **split.sizes)
    return split


def chronological_counts(n: int) -> tuple[int, int, int]:
    """Per-user (train, validation, test) sizes.

    train = floor(0.7 n) but at least 1, test = ceil(0.2 n) capped by what is
    left, validation = remainder.
    """
    if n <= 0:
        return (0, 0, 0)
    n_train = max(1, math.floor(0.7 * n + _EPS))
    n_test = min(math.ceil(0.2 * n - _EPS), n - n_train)
    return (n_train, n - n_train - n_test, n_test)


def _chronological(records: Sequence[Any], name: str) -> DatasetSplit:
    if not records:
        raise EmptyInputError("Cannot split an empty record list")
    per_user: dict[str, list[int]] = defaultdict(list)
    for index, record in enumerate(records):
        per_user[record.user_id].append(index)

    train: list[int] = []
    valid: list[int] = []
    test: list[int] = []
    for user in sorted(per_user):
        indices = sorted(per_user[user], key=lambda i: (records[i].timestamp, i))
        n_train, n_valid, _ = chronological_counts(len(indices))
        train.extend(indices[:n_train])
        valid.extend(indices[n_train : n_train + n_valid])
        test.extend(indices[n_train + n_valid :])

    split = DatasetSplit(
        name=name,  # type: ignore[arg-type]
        train=tuple(sorted(train)),
        validation=tuple(sorted(valid)),
        test=tuple(sorted(test)),
        seed=None,
        ratios=DEFAULT_RATIOS,
    )
    logger.info("Built chronological split", name=name, users=len(per_user), **split.sizes)
    return split


def split_istas_t(records: Sequence[Any]) -> DatasetSplit:
    """Per-user chronological split of query records."""
    return _chronological(records, "istas_t")


def split_lsapp(events: Sequence[Any]) -> DatasetSplit:
    """Per-user chronological split of app-usage records."""
    return _chronological(events, "lsapp")


def write_split(split: DatasetSplit, path: Path) -> Path:
    """Header line with JSON metadata, then ``partition<TAB>index`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "name": split.name,
        "seed": split.seed,
        "ratios": list(split.ratios),
        "sizes": split.sizes,
    }
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for partition in PARTITIONS:
            for index in split.partition(partition):
                handle.write(f"{partition}\t{index}\n")
    return path


def read_split(path: Path) -> DatasetSplit:
    path = Path(path)
    if not path.is_file():
        raise MissingResourceError(f"Split file not found: {path}", path=str(path))
    with path.open(encoding="utf-8") as handle:
        try:
            header = json.loads(handle.readline())
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"Malformed split header in {path.name}") from exc
        parts: dict[str, list[int]] = {name: [] for name in PARTITIONS}
        for number, line in enumerate(handle, start=2):
            line = line.strip()
            if not line:
                continue
            name, _, raw = line.partition("\t")
            if name not in parts or not raw.isdigit():
                raise InputFormatError(
                    f"Malformed split line {number} in {path.name}", line=number
                )
            parts[name].append(int(raw))
    return DatasetSplit(
        name=header["name"],
        train=tuple(parts["train"]),
        validation=tuple(parts["validation"]),
        test=tuple(parts["test"]),
        seed=header.get("seed"),
        ratios=tuple(header.get("ratios", DEFAULT_RATIOS)),
    )
