"""SGD and Adam updates over a ParameterStore."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..utils.errors import NonFiniteGradientError
from .params import ParameterStore


@dataclass(slots=True)
class OptimizerState:
    algorithm: Literal["sgd", "adam"] = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: dict[str, int] = field(default_factory=dict)


def optimizer_step(store: ParameterStore, state: OptimizerState) -> ParameterStore:
    """Apply one update, then zero every gradient.

    All gradients are checked before anything changes. Parameters whose
    gradient is entirely zero are left alone, moments included, so a step
    with zero gradients is the identity.
    """
    for param in store:
        if param.trainable and not np.all(np.isfinite(param.grad)):
            raise NonFiniteGradientError(param.name)

    state.step += 1
    for param in store:
        if not param.trainable or not param.grad.any():
            continue
        if state.algorithm == "sgd":
            param.value -= state.lr * param.grad
            continue
        m = state.m.setdefault(param.name, np.zeros_like(param.value))
        v = state.v.setdefault(param.name, np.zeros_like(param.value))
        t = state.t.get(param.name, 0) + 1
        state.t[param.name] = t
        m *= state.beta1
        m += (1.0 - state.beta1) * param.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * param.grad**2
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        param.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    store.zero_grad()
    return store
