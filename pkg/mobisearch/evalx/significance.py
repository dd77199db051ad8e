"""Paired two-tailed t-tests with Bonferroni correction."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from ..utils.errors import ValidationFailure
from .metrics import EvalResult

SELECTION_ALPHA = 0.05
RECOMMENDATION_ALPHA = 0.001


@dataclass(frozen=True, slots=True)
class TTestResult:
    t: float | None
    p: float
    significant: bool
    degenerate: bool
    threshold: float


def paired_ttest(
    a: Sequence[float] | np.ndarray,
    b: Sequence[float] | np.ndarray,
    comparisons: int = 1,
    alpha: float = SELECTION_ALPHA,
) -> TTestResult:
    """Two-tailed paired t-test; significant iff p < alpha / comparisons.

    Differences without variance leave t undefined: p is 1 when the mean
    difference is 0 and 0 otherwise, with ``degenerate`` set.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationFailure("paired samples must be equal-length vectors")
    if a.size < 2:
        raise ValidationFailure("paired t-test needs at least two pairs", n=int(a.size))
    if comparisons < 1:
        raise ValidationFailure("comparisons must be at least 1", comparisons=comparisons)

    threshold = alpha / comparisons
    diffs = a - b
    mean = float(diffs.mean())
    if float(diffs.std(ddof=1)) == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p=1.0, significant=False, degenerate=True, threshold=threshold)
        return TTestResult(t=None, p=0.0, significant=True, degenerate=True, threshold=threshold)

    result = stats.ttest_rel(a, b)
    t, p = float(result.statistic), float(result.pvalue)
    return TTestResult(t=t, p=p, significant=p < threshold, degenerate=False, threshold=threshold)


@dataclass(slots=True)
class SignificanceTable:
    """Reference system against each other system on one metric."""

    reference: str
    metric: str
    alpha: float
    comparisons: int
    rows: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "reference": self.reference,
            "metric": self.metric,
            "alpha": self.alpha,
            "bonferroni_divisor": self.comparisons,
            "rows": self.rows,
        }


def significance_table(
    reference: EvalResult,
    others: Sequence[EvalResult],
    metric: str = "mrr",
    alpha: float = SELECTION_ALPHA,
) -> SignificanceTable:
    """Bonferroni divisor = number of systems compared against the reference."""
    table = SignificanceTable(reference.system, metric, alpha, max(1, len(others)))
    ref_values = reference.per_instance(metric)
    for other in others:
        if other.instance_ids != reference.instance_ids:
            raise ValidationFailure(
                "systems were not evaluated on the same instances",
                reference=reference.system,
                system=other.system,
            )
        values = other.per_instance(metric)
        if len(values) < 2:
            continue
        test = paired_ttest(ref_values, values, table.comparisons, alpha)
        table.rows.append(
            {
                "system": other.system,
                "reference_mean": float(ref_values.mean()),
                "system_mean": float(values.mean()),
                "delta": float(ref_values.mean() - values.mean()),
                **asdict(test),
            }
        )
    return table
