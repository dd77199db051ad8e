"""Log parsing, session segmentation, vocabularies and dataset splits."""

from .instances import RecommendationInstance, build_recommendation_instances
from .parsing import (
    parse_category_map,
    parse_query_log,
    parse_stats_log,
    parse_usage_log,
    parse_user_offsets,
)
from .records import (
    DatasetSplit,
    EventKind,
    ParseReport,
    QueryRecord,
    Session,
    UsageEvent,
    UsageStat,
)
from .sessions import dedup_usage, filter_top_apps, segment_sessions, sessionize, usage_records
from .splits import read_split, split_istas_r, split_istas_t, split_lsapp, write_split
from .text import PAD, UNK, Vocabulary, build_vocabulary, tokenize

__all__ = [
    "PAD",
    "UNK",
    "DatasetSplit",
    "EventKind",
    "ParseReport",
    "QueryRecord",
    "RecommendationInstance",
    "Session",
    "UsageEvent",
    "UsageStat",
    "Vocabulary",
    "build_recommendation_instances",
    "build_vocabulary",
    "dedup_usage",
    "filter_top_apps",
    "parse_category_map",
    "parse_query_log",
    "parse_stats_log",
    "parse_usage_log",
    "parse_user_offsets",
    "read_split",
    "segment_sessions",
    "sessionize",
    "split_istas_r",
    "split_istas_t",
    "split_lsapp",
    "tokenize",
    "usage_records",
    "write_split",
]
