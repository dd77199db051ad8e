"""Forward and backward passes of the layers both models are made of.

All functions work on float64 numpy arrays and accept a leading batch
dimension. Backward functions take the cached forward inputs and the
upstream gradient and return gradients in the same order as the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..utils.errors import ShapeError, ValidationFailure


def dense_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = W x + b for a vector x, or row-wise for a batch (B, in)."""
    if W.ndim != 2 or b.shape != (W.shape[0],) or x.shape[-1] != W.shape[1]:
        raise ShapeError(
            "dense_forward shapes do not conform",
            W=list(W.shape),
            b=list(b.shape),
            x=list(x.shape),
        )
    return x @ W.T + b


def dense_backward(
    W: np.ndarray, x: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dW, db, dx) of a dense layer."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW = dy2.T @ x2
    db = dy2.sum(axis=0)
    dx = (dy2 @ W).reshape(x.shape)
    return dW, db, dx


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return special.expit(x)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Normalized exponentials with max-subtraction."""
    if x.size == 0:
        raise ShapeError("softmax of an empty input")
    return special.softmax(x, axis=axis)


def dropout(
    x: np.ndarray,
    rate: float,
    training: bool,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout; returns the output and the scaled keep-mask."""
    if not 0.0 <= rate < 1.0:
        raise ValidationFailure("dropout rate must lie in [0, 1)", rate=rate)
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValidationFailure("training-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(mask: np.ndarray | None, dy: np.ndarray) -> np.ndarray:
    return dy if mask is None else dy * mask


@dataclass(slots=True)
class LSTMCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


def lstm_step(
    W: np.ndarray,
    U: np.ndarray,
    b: np.ndarray,
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, LSTMCache]:
    """One LSTM step. Gate blocks in W (4h, in), U (4h, h), b (4h) are i, f, g, o."""
    hidden = U.shape[1]
    if (
        W.shape[0] != 4 * hidden
        or U.shape != (4 * hidden, hidden)
        or b.shape != (4 * hidden,)
        or x.shape[-1] != W.shape[1]
        or h_prev.shape[-1] != hidden
        or c_prev.shape != h_prev.shape
    ):
        raise ShapeError(
            "lstm_step shapes do not conform",
            W=list(W.shape),
            U=list(U.shape),
            x=list(x.shape),
            h=list(h_prev.shape),
        )
    z = x @ W.T + h_prev @ U.T + b
    i = special.expit(z[..., :hidden])
    f = special.expit(z[..., hidden : 2 * hidden])
    g = np.tanh(z[..., 2 * hidden : 3 * hidden])
    o = special.expit(z[..., 3 * hidden :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, LSTMCache(x, h_prev, c_prev, i, f, g, o, c, tanh_c)


def lstm_cell(
    W: np.ndarray,
    U: np.ndarray,
    b: np.ndarray,
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """(h_t, c_t) of a standard LSTM cell."""
    h, c, _ = lstm_step(W, U, b, x, h_prev, c_prev)
    return h, c


def lstm_step_backward(
    W: np.ndarray,
    U: np.ndarray,
    cache: LSTMCache,
    dh: np.ndarray,
    dc_next: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dW, dU, db, dx, dh_prev, dc_prev)."""
    do = dh * cache.tanh_c
    dc = dc_next + dh * cache.o * (1.0 - cache.tanh_c**2)
    di = dc * cache.g
    df = dc * cache.c_prev
    dg = dc * cache.i
    dc_prev = dc * cache.f
    dz = np.concatenate(
        [
            di * cache.i * (1.0 - cache.i),
            df * cache.f * (1.0 - cache.f),
            dg * (1.0 - cache.g**2),
            do * cache.o * (1.0 - cache.o),
        ],
        axis=-1,
    )
    dz2 = dz.reshape(-1, dz.shape[-1])
    dW = dz2.T @ cache.x.reshape(-1, cache.x.shape[-1])
    dU = dz2.T @ cache.h_prev.reshape(-1, cache.h_prev.shape[-1])
    db = dz2.sum(axis=0)
    dx = dz @ W
    dh_prev = dz @ U
    return dW, dU, db, dx, dh_prev, dc_prev


def lstm_forward(
    W: np.ndarray, U: np.ndarray, b: np.ndarray, xs: np.ndarray
) -> tuple[np.ndarray, list[LSTMCache]]:
    """Run over xs (B, T, in) from zero state; returns the last hidden state."""
    batch, steps = xs.shape[0], xs.shape[1]
    hidden = U.shape[1]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    caches: list[LSTMCache] = []
    for t in range(steps):
        h, c, cache = lstm_step(W, U, b, xs[:, t, :], h, c)
        caches.append(cache)
    return h, caches


def lstm_backward(
    W: np.ndarray, U: np.ndarray, caches: list[LSTMCache], dh_last: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backpropagation through time from the last hidden state.

    Returns (dW, dU, db, dxs) with dxs shaped like the forward input.
    """
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[0])
    dxs = np.zeros((dh_last.shape[0], len(caches), W.shape[1]))
    dh = dh_last
    dc = np.zeros_like(dh_last)
    for t in range(len(caches) - 1, -1, -1):
        gW, gU, gb, dx, dh, dc = lstm_step_backward(W, U, caches[t], dh, dc)
        dW += gW
        dU += gU
        db += gb
        dxs[:, t, :] = dx
    return dW, dU, db, dxs
