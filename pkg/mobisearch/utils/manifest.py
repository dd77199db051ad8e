"""Run manifests written next to every artifact."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from .. import __version__

MANIFEST_NAME = "manifest.json"


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def input_digests(paths: Iterable[Path]) -> dict[str, str]:
    """SHA-256 of every existing input file, keyed by file name."""
    digests: dict[str, str] = {}
    for path in paths:
        if path.is_file():
            digests[path.name] = file_digest(path)
        elif path.is_dir():
            for child in sorted(path.iterdir()):
                if child.is_file() and child.suffix in {".tsv", ".json", ".split"}:
                    digests[f"{path.name}/{child.name}"] = file_digest(child)
    return digests


def dump_json(payload: Any, path: Path) -> None:
    """Write JSON deterministically (sorted keys, fixed indentation)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, default=str)
        + "\n",
        encoding="utf-8",
    )


def write_manifest(
    out_dir: Path,
    command: str,
    config: dict[str, Any],
    seed: int | None,
    inputs: Iterable[Path] = (),
) -> Path:
    """Record everything needed to rerun ``command``; no wall-clock fields."""
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": input_digests(inputs),
        "version": __version__,
    }
    path = out_dir / MANIFEST_NAME
    dump_json(manifest, path)
    return path
