"""Exact posteriors under the generating process."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from ..context.usage import UsageContextDistribution
from ..dataio.instances import RecommendationInstance
from ..dataio.text import PAD
from ..models.cntas import SelectionExample
from ..ranking import RankedPrediction, rank_array
from .generator import GroundTruth, target_prior


def recommendation_posterior(
    truth: GroundTruth,
    user: str,
    t: int,
    recent: Sequence[str],
    offset: int = 0,
) -> np.ndarray:
    return truth.next_distribution(user, [a for a in recent if a != PAD], t, offset)


def selection_posterior(
    truth: GroundTruth,
    user: str,
    tokens: Sequence[str],
    context: UsageContextDistribution,
) -> np.ndarray:
    """p(target | terms, context) in log space; the term count does not depend on the target."""
    mixing = truth.spec.mixing
    pool_size = len(truth.pool)
    ranked = context.ranked_apps()
    prior = target_prior(truth, user, ranked[0] if ranked else None)
    with np.errstate(divide="ignore"):
        log_post = np.log(prior)
        for j, app in enumerate(truth.apps):
            own = set(truth.vocabularies[app])
            size = len(truth.vocabularies[app])
            for token in tokens:
                p = (1.0 - mixing) * (token in own) / size + mixing / pool_size
                log_post[j] += np.log(p)
    finite = np.isfinite(log_post)
    if not finite.any():
        return np.full(len(truth.apps), 1.0 / len(truth.apps))
    peak = log_post[finite].max()
    weights = np.where(finite, np.exp(log_post - peak), 0.0)
    return weights / weights.sum()


def bayes_oracle(
    truth: GroundTruth,
    instance: RecommendationInstance | SelectionExample,
    offsets: Mapping[str, int] | None = None,
) -> RankedPrediction:
    """Apps by exact posterior probability, ties by app id."""
    if isinstance(instance, SelectionExample):
        posterior = selection_posterior(truth, instance.user_id, instance.tokens, instance.context)
    else:
        offset = (offsets or {}).get(instance.user_id, 0)
        posterior = recommendation_posterior(
            truth, instance.user_id, instance.timestamp, instance.window, offset
        )
    return rank_array(truth.apps, posterior)
