"""Shared fixtures: small hand-built logs and a tiny synthetic dataset."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from pathlib import Path

import pytest

from mobisearch import settings
from mobisearch.dataio.records import QueryRecord, UsageEvent, UsageStat
from mobisearch.syngen import generate_dataset, write_dataset
from mobisearch.utils.models import GeneratorSpec

EventFactory = Callable[[str, Sequence[tuple[int, str]]], list[UsageEvent]]


@pytest.fixture(autouse=True)
def _isolated_settings(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("MOBISEARCH_OUTPUT_ROOT", raising=False)
    settings._settings_override.clear()
    settings._settings_override["output_root"] = tmp_path
    yield
    settings._settings_override.clear()


@pytest.fixture
def make_events() -> EventFactory:
    """(timestamp, app) pairs for one user as launch events."""

    def build(user: str, pairs: Sequence[tuple[int, str]]) -> list[UsageEvent]:
        return [
            UsageEvent(user_id=user, timestamp=t, app_id=app, kind="launch") for t, app in pairs
        ]

    return build


@pytest.fixture
def query_records() -> list[QueryRecord]:
    rows = [
        ("u1", 1000, "cheap flights to rome", "travel"),
        ("u1", 2000, "pasta recipe", "cook"),
        ("u1", 3000, "flights paris", "travel"),
        ("u2", 1500, "carbonara recipe", "cook"),
        ("u2", 2500, "hotel rome", "travel"),
    ]
    return [QueryRecord(user_id=u, timestamp=t, query=q, target_app=a) for u, t, q, a in rows]


@pytest.fixture
def usage_stats() -> list[UsageStat]:
    return [
        UsageStat(user_id="u1", timestamp=900, app_id="travel", seconds=120.0),
        UsageStat(user_id="u1", timestamp=900, app_id="mail", seconds=30.0),
        UsageStat(user_id="u1", timestamp=2900, app_id="cook", seconds=60.0),
    ]


@pytest.fixture
def synth_spec() -> GeneratorSpec:
    return GeneratorSpec(
        seed=3,
        num_users=4,
        num_apps=5,
        events_per_user=80,
        queries_per_user=25,
        chain="cycle",
    )


@pytest.fixture
def synth_dir(tmp_path: Path, synth_spec: GeneratorSpec) -> Path:
    """A small generated dataset written as TSV files."""
    out = tmp_path / "synth"
    write_dataset(out, generate_dataset(synth_spec))
    return out
