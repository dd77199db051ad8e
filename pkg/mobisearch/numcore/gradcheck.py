"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np
import structlog

from .params import ParameterStore

logger = structlog.get_logger(__name__)

DEFAULT_STEP = 1e-5


@dataclass(slots=True)
class GradCheckReport:
    tolerance: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def worst(self) -> str | None:
        if not self.errors:
            return None
        return max(self.errors, key=self.errors.__getitem__)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    @property
    def failed(self) -> list[str]:
        return [name for name, err in self.errors.items() if err > self.tolerance]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, 1e-8)."""
    diff = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return diff / max(scale, 1e-8)


def gradient_check(
    closure: Callable[[], float],
    store: ParameterStore,
    tolerance: float = 1e-4,
    step: float = DEFAULT_STEP,
    names: Iterable[str] | None = None,
) -> GradCheckReport:
    """Compare analytic and central-difference gradients parameter by parameter.

    ``closure`` must run a deterministic forward and backward pass, writing
    gradients into ``store`` and returning the scalar loss.
    """
    selected = list(names) if names is not None else [p.name for p in store if p.trainable]

    store.zero_grad()
    closure()
    analytic = {name: store[name].grad.copy() for name in selected}

    report = GradCheckReport(tolerance=tolerance)
    for name in selected:
        value = store[name].value
        numeric = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + step
            store.zero_grad()
            plus = closure()
            value[index] = original - step
            store.zero_grad()
            minus = closure()
            value[index] = original
            numeric[index] = (plus - minus) / (2.0 * step)
        report.errors[name] = relative_error(analytic[name], numeric)

    store.zero_grad()
    if report.passed:
        logger.debug("Gradient check passed", max_error=report.max_error)
    else:
        logger.warning("Gradient check failed", worst=report.worst, max_error=report.max_error)
    return report
