"""Training losses and their gradients with respect to predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog
from scipy import special

logger = structlog.get_logger(__name__)

PROB_FLOOR = 1e-12


@dataclass(slots=True)
class LossStats:
    """Counts probabilities clamped at PROB_FLOOR."""

    clamped: int = 0


def mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean squared error over the mini-batch."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    return float(np.mean((y_hat - y) ** 2))


def mse_grad(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    return 2.0 * (y_hat - y) / y_hat.size


def _hinge_terms(y1, y2, y_hat1, y_hat2) -> tuple[np.ndarray, np.ndarray]:
    sign = np.sign(np.asarray(y1, dtype=np.float64) - np.asarray(y2, dtype=np.float64))
    margin = 1.0 - sign * (np.asarray(y_hat1, dtype=np.float64) - np.asarray(y_hat2, dtype=np.float64))
    return sign, margin


def hinge_pair(y1, y2, y_hat1, y_hat2) -> float:
    """Mean of max{0, 1 - sign(y1 - y2) (y_hat1 - y_hat2)} over the batch."""
    _, margin = _hinge_terms(y1, y2, y_hat1, y_hat2)
    return float(np.mean(np.maximum(margin, 0.0)))


def hinge_pair_grad(y1, y2, y_hat1, y_hat2) -> tuple[np.ndarray, np.ndarray]:
    """Gradients with respect to (y_hat1, y_hat2)."""
    sign, margin = _hinge_terms(y1, y2, y_hat1, y_hat2)
    active = (margin > 0.0).astype(np.float64)
    n = max(np.size(margin), 1)
    d1 = -sign * active / n
    return d1, -d1


def cross_entropy(
    p: np.ndarray,
    target: int | np.ndarray,
    stats: LossStats | None = None,
) -> float:
    """-ln p[target], averaged over the batch for 2-D input.

    Probabilities below PROB_FLOOR are clamped and counted.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        picked = np.array([p[int(target)]])
    else:
        targets = np.asarray(target, dtype=np.int64)
        picked = p[np.arange(p.shape[0]), targets]
    low = picked < PROB_FLOOR
    if low.any():
        count = int(low.sum())
        if stats is not None:
            stats.clamped += count
        logger.warning("Clamped probabilities in cross entropy", count=count)
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def softmax_cross_entropy(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Fused softmax + cross entropy; returns (loss, probabilities, dlogits)."""
    targets = np.asarray(targets, dtype=np.int64)
    log_p = special.log_softmax(logits, axis=-1)
    rows = np.arange(logits.shape[0])
    loss = float(-np.mean(log_p[rows, targets]))
    probs = np.exp(log_p)
    dlogits = probs.copy()
    dlogits[rows, targets] -= 1.0
    dlogits /= logits.shape[0]
    return loss, probs, dlogits
