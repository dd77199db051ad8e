"""Descriptive analyses of query and usage logs."""

from .context import RankHistogram, app_share, context_rank_histogram, temporal_distribution
from .queries import overlap_report, query_length_distribution, query_overlap
from .sessions import (
    CooccurrenceMatrix,
    TransitionModel,
    cooccurrence,
    markov_transitions,
    session_app_counts,
    session_overlap,
    write_edges,
)
from .stats import descriptive_stats

__all__ = [
    "CooccurrenceMatrix",
    "RankHistogram",
    "TransitionModel",
    "app_share",
    "context_rank_histogram",
    "cooccurrence",
    "descriptive_stats",
    "markov_transitions",
    "overlap_report",
    "query_length_distribution",
    "query_overlap",
    "session_app_counts",
    "session_overlap",
    "temporal_distribution",
    "write_edges",
]
