"""Synthetic datasets on disk in the ingestion formats."""

from __future__ import annotations

import json
from pathlib import Path

from ..dataio.parsing import (
    CATEGORIES_FILE,
    QUERIES_FILE,
    STATS_FILE,
    USAGE_FILE,
    USERS_FILE,
    write_category_map,
    write_queries,
    write_stats,
    write_usage,
    write_user_offsets,
)
from ..utils.errors import InputFormatError, MissingResourceError
from ..utils.manifest import dump_json
from .generator import GroundTruth, SyntheticDataset

GROUND_TRUTH_FILE = "ground_truth.json"
CATEGORY_COUNT = 3


def write_dataset(out_dir: Path, dataset: SyntheticDataset) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    truth = dataset.truth
    paths = {
        "queries": write_queries(out_dir / QUERIES_FILE, dataset.queries),
        "usage": write_usage(out_dir / USAGE_FILE, dataset.events),
        "stats": write_stats(out_dir / STATS_FILE, dataset.stats),
        "users": write_user_offsets(out_dir / USERS_FILE, dict.fromkeys(truth.users, 0)),
        "categories": write_category_map(
            out_dir / CATEGORIES_FILE,
            {app: f"category{j % CATEGORY_COUNT}" for j, app in enumerate(truth.apps)},
        ),
    }
    dump_json(truth.to_dict(), out_dir / GROUND_TRUTH_FILE)
    paths["ground_truth"] = out_dir / GROUND_TRUTH_FILE
    return paths


def load_ground_truth(path: Path) -> GroundTruth:
    if path.is_dir():
        path = path / GROUND_TRUTH_FILE
    if not path.is_file():
        raise MissingResourceError(f"Ground truth not found: {path}", path=str(path))
    try:
        return GroundTruth.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError) as exc:
        raise InputFormatError("Invalid ground truth file", path=str(path), reason=str(exc)) from exc
