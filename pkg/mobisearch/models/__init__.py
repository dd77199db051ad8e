"""Neural models for target-app selection and next-app recommendation."""

from .cntas import (
    CNTAS,
    SelectionExample,
    SelectionInstance,
    negatives_sweep,
    train_pairwise,
    train_pointwise,
)
from .neusa import (
    ABLATIONS,
    NeuSA,
    ablation_config,
    context_length_sweep,
    train_recommender,
)
from .training import FeedForward, TrainingCurve

__all__ = [
    "ABLATIONS",
    "CNTAS",
    "FeedForward",
    "NeuSA",
    "SelectionExample",
    "SelectionInstance",
    "TrainingCurve",
    "ablation_config",
    "context_length_sweep",
    "negatives_sweep",
    "train_pairwise",
    "train_pointwise",
    "train_recommender",
]
