"""Contextual features: usage distributions, time bins and app windows."""

from .bins import NUM_BINS, TimeBin, day_of_week, local_hour, time_bin
from .features import AppWindow, context_embedding, recent_apps
from .usage import BinUsageTable, ContextIndex, UsageContextDistribution, usage_distribution

__all__ = [
    "NUM_BINS",
    "AppWindow",
    "BinUsageTable",
    "ContextIndex",
    "TimeBin",
    "UsageContextDistribution",
    "context_embedding",
    "day_of_week",
    "local_hour",
    "recent_apps",
    "time_bin",
    "usage_distribution",
]
