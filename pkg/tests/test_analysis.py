"""Dataset statistics, overlap, transitions, co-occurrence and context ranks."""

import numpy as np
import pytest

from mobisearch.analysis import (
    app_share,
    context_rank_histogram,
    cooccurrence,
    descriptive_stats,
    markov_transitions,
    overlap_report,
    query_length_distribution,
    query_overlap,
    session_app_counts,
    session_overlap,
    temporal_distribution,
    write_edges,
)
from mobisearch.analysis.queries import max_other_overlap
from mobisearch.context import ContextIndex
from mobisearch.dataio.records import QueryRecord
from mobisearch.dataio.sessions import sessionize


@pytest.fixture
def usage_sessions(make_events):
    events = (
        make_events("u1", [(100, "a"), (200, "b"), (300, "a")])
        + make_events("u1", [(5000, "a")])
        + make_events("u2", [(100, "a"), (150, "b"), (250, "c"), (260, "b")])
    )
    return sessionize(events)


class TestQueryOverlap:
    def test_jaccard(self):
        assert query_overlap(["a", "b"], ["b", "c"]) == pytest.approx(1 / 3)
        assert query_overlap([], []) == 0.0

    def test_best_match_excludes_the_query_itself(self):
        best = max_other_overlap([["a", "b"], ["b", "c"], ["x"]])
        np.testing.assert_allclose(best, [1 / 3, 1 / 3, 0.0])

    def test_report_rows(self):
        rows = overlap_report({"mail": [["a", "b"], ["a", "b", "c"]], "maps": [["z"]]})
        by_app = {row["app"]: row for row in rows}
        assert by_app["mail"]["tau>0.5"] == 100.0
        assert by_app["mail"]["tau>0.75"] == 0.0
        assert by_app["maps"]["tau>0.25"] == 0.0
        assert by_app["All"]["queries"] == 3
        assert by_app["All"]["tau>0.25"] == pytest.approx(200 / 3)

    def test_length_distribution(self):
        rows = query_length_distribution({"mail": [["a"], ["a", "b"]], "maps": [["a", "b", "c", "d", "e"]]})
        pooled = rows[-1]
        assert pooled["app"] == "All"
        assert pooled["1"] == pytest.approx(1 / 3)
        assert pooled[">4"] == pytest.approx(1 / 3)
        assert pooled["mean_terms"] == pytest.approx(8 / 3)


class TestTransitions:
    def test_counts_include_session_starts(self, usage_sessions):
        model = markov_transitions(usage_sessions)
        assert model.states == ("START", "a", "b", "c")
        assert model.probability("START", "a") == 1.0
        assert model.probability("b", "a") == pytest.approx(0.5)
        assert model.probability("b", "c") == pytest.approx(0.5)

    def test_category_level(self, usage_sessions):
        model = markov_transitions(usage_sessions, level="category", categories={"a": "social"})
        assert model.states == ("START", "Unknown", "social")

    def test_edges_above_threshold(self, usage_sessions, tmp_path):
        model = markov_transitions(usage_sessions, threshold=0.5)
        edges = model.edges()
        assert ("START", "a", 1.0) in edges
        assert all(p > 0.5 for _, _, p in edges)
        lines = write_edges(model, tmp_path / "edges.tsv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "src\tdst\tprobability"
        assert len(lines) == len(edges) + 1


class TestCooccurrence:
    def test_each_session_counts_once(self, usage_sessions):
        matrix = cooccurrence(usage_sessions)
        assert matrix.apps == ("a", "b", "c")
        np.testing.assert_array_equal(matrix.counts, [[3, 2, 1], [2, 2, 1], [1, 1, 1]])
        assert matrix.normalized.sum() == pytest.approx(1.0)
        assert np.all(np.diag(matrix.display) == 0.0)

    def test_restricted_to_given_apps(self, usage_sessions):
        matrix = cooccurrence(usage_sessions, apps=["b", "a"])
        assert matrix.apps == ("a", "b")
        assert matrix.counts[0, 1] == 2

    def test_distinct_apps_per_session(self, usage_sessions):
        assert session_app_counts(usage_sessions) == {1: pytest.approx(1 / 3), 2: pytest.approx(1 / 3), 3: pytest.approx(1 / 3)}


class TestSessionOverlap:
    def test_single_and_multi_app_sessions(self):
        queries = [
            QueryRecord(user_id="u", timestamp=100, query="cheap flights rome", target_app="travel"),
            QueryRecord(user_id="u", timestamp=200, query="flights rome", target_app="travel"),
            QueryRecord(user_id="u", timestamp=5000, query="pasta", target_app="cook"),
            QueryRecord(user_id="u", timestamp=5100, query="news today", target_app="news"),
            QueryRecord(user_id="u", timestamp=9000, query="alone", target_app="news"),
        ]
        report = session_overlap(sessionize(queries))
        assert report["single_app"] == {"queries": 2, "overlap_pct": 100.0}
        assert report["multi_app"] == {"queries": 2, "overlap_pct": 0.0}


class TestDescriptiveStats:
    def test_query_dataset(self, query_records):
        report = descriptive_stats(query_records, sessionize(query_records))
        assert report["users"] == 2
        assert report["records"] == 5
        assert report["apps"] == 2
        assert report["records_per_user"] == {"mean": 2.5, "sd": 0.5}
        assert report["terms_per_query"]["mean"] == pytest.approx(2.4)
        assert report["metadata"]["sd"] == "population"

    def test_usage_dataset(self, usage_sessions):
        records = [item for session in usage_sessions for item in session.items]
        report = descriptive_stats(records, usage_sessions)
        assert report["sessions"] == 3
        assert "terms_per_query" not in report
        assert report["app_switches_per_session"]["mean"] == pytest.approx((2 + 0 + 3) / 3)
        assert report["session_seconds"]["median"] == 160.0


class TestContextAnalyses:
    def test_rank_histogram(self, make_events):
        index = ContextIndex.from_events(make_events("u", [(1000, "a"), (1100, "b"), (2000, "c")]))
        queries = [
            QueryRecord(user_id="u", timestamp=2000, query="x", target_app=app) for app in ("b", "a", "c")
        ]
        histogram = context_rank_histogram(queries, index, max_rank=1)
        assert histogram.counts == [1]
        assert histogram.overflow == 2
        assert histogram.absent == 1
        assert histogram.fractions()[">1"] == pytest.approx(2 / 3)

    def test_temporal_distribution_uses_local_time(self, make_events):
        events = make_events("u", [(3600, "a"), (7200, "b")])
        result = temporal_distribution(events, offsets={"u": 3600})
        assert result["hour"][2] == 0.5
        assert result["hour"][3] == 0.5
        assert result["weekday"][3] == 1.0

    def test_app_share(self):
        share = app_share(["a", "a", "b", "c"], top_n=1)
        assert share["share"] == 0.5
        assert share["apps"][0] == {"app": "a", "count": 2, "fraction": 0.5}
