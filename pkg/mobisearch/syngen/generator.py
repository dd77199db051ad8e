"""Synthetic usage and query logs with a known generating process.

Each user's app stream follows a Markov chain of order 1 or 3 whose next-app
distribution is reweighted by a time-of-day preference table. Sessions are
separated by gaps well above the five-minute session threshold, and events
inside a session are spaced 60 to 240 seconds apart so neither the duplicate
merge nor the session rule changes them. Queries are issued at usage
instants; their target is the most used app of the last 24 hours with a
chosen probability and the user's popularity otherwise, and their terms come
from the target's vocabulary or from the shared pool.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import structlog

from ..context.bins import NUM_BINS, time_bin
from ..context.usage import ContextIndex
from ..dataio.records import EventKind, QueryRecord, UsageEvent, UsageStat
from ..utils.models import GeneratorSpec
from ..utils.seeding import substream

logger = structlog.get_logger(__name__)

SHARED = "*"
IN_SESSION_MIN = 60
IN_SESSION_MAX = 240
IN_SESSION_SCALE = 30.0
BETWEEN_SESSIONS_MIN = 600
BETWEEN_SESSIONS_SCALE = 1200.0


def app_names(n: int) -> tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f"app{j:0{width}d}" for j in range(n))


def user_names(n: int) -> tuple[str, ...]:
    width = max(3, len(str(n - 1)))
    return tuple(f"u{i:0{width}d}" for i in range(n))


def vocabulary(app_position: int, size: int) -> tuple[str, ...]:
    return tuple(f"w{app_position}_{i}" for i in range(size))


@dataclass(slots=True)
class GroundTruth:
    """Everything needed to compute exact posteriors for generated data."""

    spec: GeneratorSpec
    apps: tuple[str, ...]
    users: tuple[str, ...]
    popularity: dict[str, np.ndarray]
    transitions: dict[str, np.ndarray]
    preference: np.ndarray
    vocabularies: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.spec.order

    def chain(self, user: str) -> np.ndarray:
        return self.transitions.get(user, self.transitions.get(SHARED))

    def context_row(self, recent: Sequence[int]) -> int:
        """Row of the transition matrix for the last ``order`` app positions, oldest first."""
        n = len(self.apps)
        row = 0
        for position in recent[-self.order :]:
            row = row * n + position
        return row

    def next_distribution(self, user: str, recent: Sequence[str], t: int, offset: int = 0) -> np.ndarray:
        """Exact next-app distribution given the preceding apps and the next event time.

        With fewer than ``order`` preceding apps the chain has not started and
        the user's popularity takes its place.
        """
        index = {app: j for j, app in enumerate(self.apps)}
        known = [index[a] for a in recent if a in index]
        if len(known) >= self.order:
            base = self.chain(user)[self.context_row(known)]
        else:
            base = self.popularity[user]
        weights = base * self.preference[time_bin(t, offset).index] ** self.spec.bin_preference_strength
        total = weights.sum()
        return weights / total if total > 0 else np.full(len(self.apps), 1.0 / len(self.apps))

    @property
    def pool(self) -> tuple[str, ...]:
        return tuple(w for app in self.apps for w in self.vocabularies.get(app, ()))

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec": self.spec.model_dump(mode="json"),
            "apps": list(self.apps),
            "users": list(self.users),
            "popularity": {u: p.tolist() for u, p in sorted(self.popularity.items())},
            "transitions": {k: m.tolist() for k, m in sorted(self.transitions.items())},
            "preference": self.preference.tolist(),
            "vocabularies": {a: list(v) for a, v in sorted(self.vocabularies.items())},
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> GroundTruth:
        return cls(
            spec=GeneratorSpec.model_validate(payload["spec"]),
            apps=tuple(payload["apps"]),
            users=tuple(payload["users"]),
            popularity={u: np.asarray(p) for u, p in payload["popularity"].items()},
            transitions={k: np.asarray(m) for k, m in payload["transitions"].items()},
            preference=np.asarray(payload["preference"]),
            vocabularies={a: tuple(v) for a, v in payload["vocabularies"].items()},
        )


@dataclass(slots=True)
class SyntheticDataset:
    events: list[UsageEvent]
    queries: list[QueryRecord]
    stats: list[UsageStat]
    truth: GroundTruth


def _zipf(rng: np.random.Generator, n: int, exponent: float) -> np.ndarray:
    """Zipf weights over a random permutation of the apps."""
    weights = 1.0 / np.arange(1, n + 1) ** exponent
    popularity = np.empty(n)
    popularity[rng.permutation(n)] = weights / weights.sum()
    return popularity


def _chain(rng: np.random.Generator, spec: GeneratorSpec) -> np.ndarray:
    n = spec.num_apps
    rows = n**spec.order
    if spec.chain == "cycle":
        matrix = np.zeros((n, n))
        matrix[np.arange(n), (np.arange(n) + 1) % n] = 1.0
        return matrix
    if spec.chain == "uniform":
        return np.full((rows, n), 1.0 / n)
    return rng.dirichlet(np.full(n, spec.concentration), size=rows)


def build_ground_truth(spec: GeneratorSpec) -> GroundTruth:
    rng = substream(spec.seed, "syngen.structure")
    apps = app_names(spec.num_apps)
    users = user_names(spec.num_users)
    popularity = {u: _zipf(rng, spec.num_apps, spec.zipf_exponent) for u in users}
    if spec.user_specific_chains:
        transitions = {u: _chain(rng, spec) for u in users}
    else:
        transitions = {SHARED: _chain(rng, spec)}
    preference = rng.dirichlet(np.ones(spec.num_apps), size=NUM_BINS)
    vocabularies = {app: vocabulary(j, spec.vocab_per_app) for j, app in enumerate(apps)}
    return GroundTruth(spec, apps, users, popularity, transitions, preference, vocabularies)


def _user_events(truth: GroundTruth, user: str) -> list[UsageEvent]:
    spec = truth.spec
    rng = substream(spec.seed, f"syngen.user.{user}")
    n = len(truth.apps)
    t = spec.start_epoch + int(rng.integers(0, 86400))
    recent: list[int] = []
    events: list[UsageEvent] = []
    remaining_in_session = int(rng.geometric(1.0 / spec.session_length_mean))
    while len(events) < spec.events_per_user:
        probs = truth.next_distribution(user, [truth.apps[j] for j in recent], t)
        app = int(rng.choice(n, p=probs))
        events.append(UsageEvent(user_id=user, timestamp=t, app_id=truth.apps[app], kind=EventKind.LAUNCH))
        recent = (recent + [app])[-truth.order :]
        remaining_in_session -= 1
        if remaining_in_session > 0:
            gap = IN_SESSION_MIN + rng.exponential(IN_SESSION_SCALE)
            t += int(np.clip(gap, IN_SESSION_MIN, IN_SESSION_MAX))
        else:
            t += BETWEEN_SESSIONS_MIN + int(rng.exponential(BETWEEN_SESSIONS_SCALE))
            remaining_in_session = int(rng.geometric(1.0 / spec.session_length_mean))
    return events


def generate_usage(
    spec: GeneratorSpec, truth: GroundTruth | None = None
) -> tuple[list[UsageEvent], GroundTruth]:
    """Usage events of every user, ordered by user then time, and the planted process."""
    truth = truth or build_ground_truth(spec)
    events: list[UsageEvent] = []
    for user in truth.users:
        events.extend(_user_events(truth, user))
    logger.info("Generated usage", users=len(truth.users), events=len(events), order=spec.order)
    return events, truth


def target_prior(
    truth: GroundTruth, user: str, most_used: str | None
) -> np.ndarray:
    """Distribution of a query's target before its terms are seen."""
    rho = truth.spec.context_correlation
    prior = truth.popularity[user].copy()
    if most_used is None:
        return prior
    prior *= 1.0 - rho
    prior[truth.apps.index(most_used)] += rho
    return prior


def _query_terms(rng: np.random.Generator, truth: GroundTruth, target: str) -> list[str]:
    spec = truth.spec
    pool = truth.pool
    own = truth.vocabularies[target]
    count = 1 + int(rng.poisson(spec.mean_extra_terms))
    terms = []
    for _ in range(count):
        if rng.random() < spec.mixing:
            terms.append(pool[int(rng.integers(len(pool)))])
        else:
            terms.append(own[int(rng.integers(len(own)))])
    return terms


def generate_queries(
    spec: GeneratorSpec,
    events: Sequence[UsageEvent] | None = None,
    truth: GroundTruth | None = None,
) -> tuple[list[QueryRecord], list[UsageStat]]:
    """Queries at usage instants plus the 24 h usage snapshot taken at each query."""
    if events is None or truth is None:
        events, truth = generate_usage(spec, truth)
    index = ContextIndex.from_events(events)
    per_user: dict[str, list[UsageEvent]] = {}
    for event in events:
        per_user.setdefault(event.user_id, []).append(event)

    queries: list[QueryRecord] = []
    stats: list[UsageStat] = []
    for user in truth.users:
        history = per_user.get(user, [])
        if spec.queries_per_user == 0 or len(history) < 2:
            continue
        rng = substream(spec.seed, f"syngen.queries.{user}")
        count = min(spec.queries_per_user, len(history) - 1)
        positions = np.sort(rng.choice(np.arange(1, len(history)), size=count, replace=False))
        for position in positions:
            t = history[int(position)].timestamp
            dist = index.distribution(user, t)
            ranked = dist.ranked_apps()
            prior = target_prior(truth, user, ranked[0] if ranked else None)
            target = truth.apps[int(rng.choice(len(truth.apps), p=prior))]
            terms = _query_terms(rng, truth, target)
            queries.append(QueryRecord(user_id=user, timestamp=t, query=" ".join(terms), target_app=target))
            stats.extend(
                UsageStat(user_id=user, timestamp=t, app_id=app, seconds=seconds)
                for app, seconds in sorted(dist.seconds.items())
            )
    logger.info("Generated queries", queries=len(queries), snapshots=len(stats))
    return queries, stats


def generate_dataset(spec: GeneratorSpec) -> SyntheticDataset:
    events, truth = generate_usage(spec)
    queries, stats = generate_queries(spec, events, truth)
    return SyntheticDataset(events, queries, stats, truth)
