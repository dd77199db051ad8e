"""Pieces shared by both trainers: the feed-forward head, batching and curves."""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..numcore.layers import (
    dense_backward,
    dense_forward,
    dropout,
    dropout_backward,
    relu,
    relu_backward,
)
from ..numcore.params import ParameterStore, glorot_init
from ..utils.errors import TrainingDivergedError


@dataclass(slots=True)
class _FeedForwardCache:
    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    m1: np.ndarray | None
    z2: np.ndarray
    a2: np.ndarray
    m2: np.ndarray | None


class FeedForward:
    """Two ReLU hidden layers with inverted dropout and a linear output layer."""

    def __init__(
        self,
        store: ParameterStore,
        prefix: str,
        sizes: tuple[int, int, int, int],
        rng: np.random.Generator,
    ) -> None:
        n_in, h1, h2, n_out = sizes
        self.store = store
        self.names = tuple(f"{prefix}.{p}" for p in ("w1", "b1", "w2", "b2", "w3", "b3"))
        if self.names[0] not in store:
            store.add(self.names[0], glorot_init(rng, h1, n_in))
            store.add(self.names[1], np.zeros(h1))
            store.add(self.names[2], glorot_init(rng, h2, h1))
            store.add(self.names[3], np.zeros(h2))
            store.add(self.names[4], glorot_init(rng, n_out, h2))
            store.add(self.names[5], np.zeros(n_out))

    def _p(self, i: int) -> np.ndarray:
        return self.store[self.names[i]].value

    def forward(
        self,
        x: np.ndarray,
        rate: float,
        training: bool,
        rng: np.random.Generator | None,
    ) -> tuple[np.ndarray, _FeedForwardCache]:
        z1 = dense_forward(self._p(0), self._p(1), x)
        a1, m1 = dropout(relu(z1), rate, training, rng)
        z2 = dense_forward(self._p(2), self._p(3), a1)
        a2, m2 = dropout(relu(z2), rate, training, rng)
        out = dense_forward(self._p(4), self._p(5), a2)
        return out, _FeedForwardCache(x, z1, a1, m1, z2, a2, m2)

    def backward(self, cache: _FeedForwardCache, dout: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients and return the input gradient."""
        grads = self.store
        dW3, db3, da2 = dense_backward(self._p(4), cache.a2, dout)
        dz2 = relu_backward(cache.z2, dropout_backward(cache.m2, da2))
        dW2, db2, da1 = dense_backward(self._p(2), cache.a1, dz2)
        dz1 = relu_backward(cache.z1, dropout_backward(cache.m1, da1))
        dW1, db1, dx = dense_backward(self._p(0), cache.x, dz1)
        for name, grad in zip(self.names, (dW1, db1, dW2, db2, dW3, db3), strict=True):
            grads[name].grad += grad
        return dx


def minibatches(
    n: int, batch: int, rng: np.random.Generator | None = None
) -> Iterator[np.ndarray]:
    """Index batches over range(n), shuffled when a generator is given."""
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch):
        yield order[start : start + batch]


def check_finite(loss: float, epoch: int, batch: int) -> None:
    if not math.isfinite(loss):
        raise TrainingDivergedError(
            "Training loss is not finite", epoch=epoch, batch=batch, loss=repr(loss)
        )


@dataclass(slots=True)
class TrainingCurve:
    """Per-epoch loss and validation metric plus the selected epoch."""

    metric: str
    epochs: list[dict[str, Any]] = field(default_factory=list)
    best_epoch: int | None = None
    best_value: float | None = None

    def record(self, epoch: int, loss: float, value: float | None) -> bool:
        """Append an epoch; returns True when it is the new best."""
        self.epochs.append({"epoch": epoch, "loss": loss, self.metric: value})
        improved = value is not None and (self.best_value is None or value > self.best_value)
        if improved or (value is None and self.best_value is None):
            self.best_epoch = epoch
            self.best_value = value
            return True
        return False

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "best_value": self.best_value,
        }
