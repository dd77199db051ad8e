"""Synthetic datasets with planted structure and their exact oracles."""

from .generator import (
    GroundTruth,
    SyntheticDataset,
    build_ground_truth,
    generate_dataset,
    generate_queries,
    generate_usage,
)
from .oracle import bayes_oracle, recommendation_posterior, selection_posterior
from .writer import GROUND_TRUTH_FILE, load_ground_truth, write_dataset

__all__ = [
    "GROUND_TRUTH_FILE",
    "GroundTruth",
    "SyntheticDataset",
    "bayes_oracle",
    "build_ground_truth",
    "generate_dataset",
    "generate_queries",
    "generate_usage",
    "load_ground_truth",
    "recommendation_posterior",
    "selection_posterior",
    "write_dataset",
]
