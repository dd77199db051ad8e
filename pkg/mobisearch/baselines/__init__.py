"""Non-neural rankers for both tasks and the usage-context interpolation filter."""

from .contextual import context_filter_cr, normalize_scores, tune_interpolation, tune_neighbors
from .lexical import AppDocument, BM25Ranker, QueryLikelihoodRanker, build_app_documents
from .neighbors import EmbeddingTable, KNNEmbeddingRanker, KNNTfidfRanker
from .static import app_counts, mfu_rank, mru_rank

__all__ = [
    "AppDocument",
    "BM25Ranker",
    "EmbeddingTable",
    "KNNEmbeddingRanker",
    "KNNTfidfRanker",
    "QueryLikelihoodRanker",
    "app_counts",
    "build_app_documents",
    "context_filter_cr",
    "mfu_rank",
    "mru_rank",
    "normalize_scores",
    "tune_interpolation",
    "tune_neighbors",
]
