"""Ranking metrics, significance tests, breakdowns and result files."""

from .breakdown import BreakdownTable, LengthBucket, bucket_mrr, delta_breakdown, length_buckets
from .metrics import EvalResult, evaluate, mrr, ndcg_at_k, rank_position, recall_at_k
from .reporting import (
    METRIC_COLUMNS,
    aggregate_columns,
    aggregate_runs,
    read_predictions,
    write_breakdown_tsv,
    write_results_json,
    write_results_tsv,
    write_significance_tsv,
    write_tsv,
)
from .significance import (
    RECOMMENDATION_ALPHA,
    SELECTION_ALPHA,
    SignificanceTable,
    TTestResult,
    paired_ttest,
    significance_table,
)

__all__ = [
    "METRIC_COLUMNS",
    "RECOMMENDATION_ALPHA",
    "SELECTION_ALPHA",
    "BreakdownTable",
    "EvalResult",
    "LengthBucket",
    "SignificanceTable",
    "TTestResult",
    "aggregate_columns",
    "aggregate_runs",
    "bucket_mrr",
    "delta_breakdown",
    "evaluate",
    "length_buckets",
    "mrr",
    "ndcg_at_k",
    "paired_ttest",
    "rank_position",
    "read_predictions",
    "recall_at_k",
    "significance_table",
    "write_breakdown_tsv",
    "write_results_json",
    "write_results_tsv",
    "write_significance_tsv",
    "write_tsv",
]
