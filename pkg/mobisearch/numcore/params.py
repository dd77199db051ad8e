"""Named parameters with gradient slots, initializers and checkpoints.

Checkpoint layout: ``manifest.json`` lists parameter names and shapes in
storage order together with hyperparameters and the seed; ``params.bin``
holds the values as little-endian float64, concatenated in that order.
"""

from __future__ import annotations

import json
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..utils.errors import InputFormatError, MissingResourceError, ShapeError

MANIFEST_FILE = "manifest.json"
BLOB_FILE = "params.bin"
_DTYPE = np.dtype("<f8")


@dataclass(slots=True)
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    trainable: bool = True

    def __post_init__(self) -> None:
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


class ParameterStore:
    """Ordered name -> Parameter mapping."""

    def __init__(self) -> None:
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Parameter:
        if name in self._params:
            raise ValueError(f"Duplicate parameter '{name}'")
        param = Parameter(name, value, trainable=trainable)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad.fill(0.0)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, value in values.items():
            param = self._params[name]
            if value.shape != param.shape:
                raise ShapeError(
                    f"Shape mismatch restoring '{name}'",
                    expected=list(param.shape),
                    found=list(value.shape),
                )
            param.value[...] = value

    def num_values(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def save(self, directory: Path, metadata: dict[str, Any]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            **metadata,
            "parameters": [
                {"name": p.name, "shape": list(p.shape), "trainable": p.trainable}
                for p in self._params.values()
            ],
        }
        (directory / MANIFEST_FILE).write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        with (directory / BLOB_FILE).open("wb") as handle:
            for param in self._params.values():
                handle.write(param.value.astype(_DTYPE, copy=False).tobytes(order="C"))
        return directory

    @classmethod
    def load(cls, directory: Path) -> tuple[ParameterStore, dict[str, Any]]:
        directory = Path(directory)
        manifest_path = directory / MANIFEST_FILE
        blob_path = directory / BLOB_FILE
        if not manifest_path.is_file() or not blob_path.is_file():
            raise MissingResourceError(f"Checkpoint not found: {directory}", path=str(directory))
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        blob = np.frombuffer(blob_path.read_bytes(), dtype=_DTYPE)
        store = cls()
        offset = 0
        for entry in manifest["parameters"]:
            shape = tuple(entry["shape"])
            size = int(np.prod(shape, dtype=np.int64))
            if offset + size > blob.size:
                raise InputFormatError("Checkpoint blob is shorter than its manifest")
            store.add(
                entry["name"],
                blob[offset : offset + size].reshape(shape).astype(np.float64),
                trainable=entry.get("trainable", True),
            )
            offset += size
        if offset != blob.size:
            raise InputFormatError("Checkpoint blob is longer than its manifest")
        metadata = {k: v for k, v in manifest.items() if k != "parameters"}
        return store, metadata


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], scale: float = 0.05) -> np.ndarray:
    """Embedding initializer: uniform(-scale, scale)."""
    return rng.uniform(-scale, scale, size=shape)


def glorot_init(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Dense / recurrent weight initializer, shape (fan_out, fan_in)."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))
