"""mobisearch - context-aware target app selection and next-app recommendation.

This package trains and evaluates two neural rankers for unified mobile
search: a query-driven target-app selector that reads the user's recent app
usage, and a sequential next-app recommender. Baselines, evaluation,
log analyses and a synthetic data generator with exact oracles come with it.
"""

__version__ = "0.1.0"
__author__ = "mobisearch Team"
__description__ = "Context-aware target app selection and next-app recommendation toolkit"

# Submodules are imported lazily by the CLI so that importing the package
# stays cheap.
__all__ = [
    "__version__",
    "__author__",
    "__description__",
]
