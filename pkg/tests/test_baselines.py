"""Static, term-matching, nearest-neighbor and context-interpolated rankers."""

import math

import numpy as np
import pytest

from mobisearch.baselines import (
    AppDocument,
    BM25Ranker,
    EmbeddingTable,
    KNNEmbeddingRanker,
    KNNTfidfRanker,
    QueryLikelihoodRanker,
    build_app_documents,
    context_filter_cr,
    mfu_rank,
    mru_rank,
    normalize_scores,
    tune_interpolation,
    tune_neighbors,
)
from mobisearch.context.usage import UsageContextDistribution
from mobisearch.ranking import RankedPrediction, rank_scores
from mobisearch.utils.errors import (
    EmptyInputError,
    InputFormatError,
    MissingResourceError,
    ValidationFailure,
)


class TestRanking:
    def test_ties_by_app_id(self):
        ranking = rank_scores({"b": 1.0, "a": 1.0, "c": 2.0})
        assert ranking.apps == ("c", "a", "b")

    def test_ties_by_given_order(self):
        ranking = rank_scores({"b": 1.0, "a": 1.0, "z": 1.0}, tie_order=["b"])
        assert ranking.apps == ("b", "a", "z")

    def test_non_finite_scores_rejected(self):
        with pytest.raises(ValueError):
            rank_scores({"a": float("nan")})


class TestStatic:
    def test_mfu_order_and_unseen_candidates(self):
        ranking = mfu_rank({"a": 3, "b": 5, "c": 3}, candidates=["a", "b", "c", "d"])
        assert ranking.apps == ("b", "a", "c", "d")
        assert ranking.scores[-1] == 0.0

    def test_mfu_without_apps(self):
        with pytest.raises(EmptyInputError):
            mfu_rank({})

    def test_mru_then_mfu(self, make_events):
        history = make_events("u", [(10, "a"), (20, "b"), (30, "a"), (40, "c")])
        mfu = mfu_rank({"c": 9, "d": 4, "a": 2, "b": 1})
        ranking = mru_rank(history, 35, mfu)
        assert ranking.apps == ("a", "b", "c", "d")
        assert ranking.scores == (4.0, 3.0, 2.0, 1.0)

    def test_mru_ignores_apps_outside_the_candidates(self, make_events):
        history = make_events("u", [(10, "x"), (20, "a")])
        ranking = mru_rank(history, 30, mfu_rank({"a": 1, "b": 1}))
        assert ranking.apps == ("a", "b")


class TestLexical:
    def test_app_documents_concatenate_queries(self):
        docs = build_app_documents([(["cheap", "flights"], "travel"), (["pasta"], "cook"), (["rome"], "travel")])
        assert docs["travel"] == AppDocument("travel", ("cheap", "flights", "rome"))
        assert docs["travel"].term_counts["rome"] == 1
        assert list(docs) == ["cook", "travel"]

    def test_bm25_hand_computed(self):
        docs = {
            "a": AppDocument("a", ("x", "q", "q", "q")),
            "b": AppDocument("b", ("y",) * 6),
        }
        scores = BM25Ranker(docs).scores(["x"])
        assert scores[0] == pytest.approx(math.log(2) * 2.2 / 2.02)
        assert scores[1] == 0.0

    def test_bm25_idf_stays_positive_for_common_terms(self):
        docs = {app: AppDocument(app, ("common",)) for app in ("a", "b", "c")}
        assert np.all(BM25Ranker(docs).idf > 0.0)

    def test_query_likelihood_hand_computed(self):
        docs = {"a": AppDocument("a", ("x", "y")), "b": AppDocument("b", ("y", "y"))}
        ranker = QueryLikelihoodRanker(docs, mu=1.0)
        np.testing.assert_allclose(ranker.scores(["x"]), [math.log(1.25 / 3), math.log(0.25 / 3)])
        assert ranker.rank(["x"]).apps == ("a", "b")

    def test_unknown_terms_are_skipped(self):
        docs = {"a": AppDocument("a", ("x",)), "b": AppDocument("b", ("y",))}
        np.testing.assert_array_equal(QueryLikelihoodRanker(docs).scores(["zzz"]), [0.0, 0.0])
        np.testing.assert_array_equal(BM25Ranker(docs).scores(["zzz"]), [0.0, 0.0])

    def test_empty_documents(self):
        with pytest.raises(EmptyInputError):
            BM25Ranker({"a": AppDocument("a", ())})


QUERIES = [["cheap", "flights"], ["flights", "rome"], ["pasta", "recipe"]]
LABELS = ["travel", "travel", "cook"]


class TestNeighbors:
    def test_tfidf_nearest_query_wins(self):
        ranker = KNNTfidfRanker(QUERIES, LABELS, k=1)
        ranking = ranker.rank(["flights"])
        assert ranking.apps[0] == "travel"
        assert ranking.score_map()["cook"] == 0.0

    def test_neighbor_scores_add_up(self):
        ranker = KNNTfidfRanker(QUERIES, LABELS, k=3)
        single = KNNTfidfRanker(QUERIES, LABELS, k=1)
        assert ranker.rank(["flights"]).score_map()["travel"] > single.rank(["flights"]).score_map()["travel"]

    def test_no_overlap_falls_back_to_tie_order(self):
        ranker = KNNTfidfRanker(QUERIES, LABELS, tie_order=["travel", "cook"])
        assert ranker.rank(["zzz"]).apps == ("travel", "cook")

    def test_embedding_neighbors(self):
        table = EmbeddingTable({"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])})
        ranker = KNNEmbeddingRanker([["a"], ["b"]], ["x", "y"], table, k=1)
        ranking = ranker.rank(["a", "zz"])
        assert ranking.apps[0] == "x"
        assert ranking.scores[0] == pytest.approx(1.0)

    def test_embedding_average_counts_misses_as_zero(self):
        table = EmbeddingTable({"a": np.array([1.0, 0.0])})
        np.testing.assert_allclose(table.average(["a", "zz"]), [0.5, 0.0])

    def test_embedding_file(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("a 1 0\nb 0 1\n", encoding="utf-8")
        table = EmbeddingTable.load(path)
        assert table.dim == 2
        assert "b" in table
        with pytest.raises(InputFormatError):
            EmbeddingTable.load(path, dim=3)
        with pytest.raises(MissingResourceError):
            EmbeddingTable.load(tmp_path / "absent.txt")

    def test_mixed_dimensions(self):
        with pytest.raises(InputFormatError):
            EmbeddingTable({"a": np.zeros(2), "b": np.zeros(3)})

    def test_tune_neighbors_prefers_smallest_best(self):
        def rank(tokens, k):
            return RankedPrediction(("good", "bad"), (1.0, 0.0)) if k >= 5 else RankedPrediction(("bad", "good"), (1.0, 0.0))

        best, table = tune_neighbors(rank, [["q"]], ["good"])
        assert best == 5
        assert [row["k"] for row in table] == [1, 5, 10, 20, 50]


BASE = RankedPrediction(("a", "b", "c"), (0.9, 0.5, 0.1))
CONTEXT = UsageContextDistribution("u", 0, 100, {"c": 30.0})


class TestContextFilter:
    def test_normalization_rules(self):
        np.testing.assert_array_equal(normalize_scores(np.array([2.0, 2.0])), [0.5, 0.5])
        np.testing.assert_array_equal(normalize_scores(np.array([0.2, 0.8])), [0.2, 0.8])
        np.testing.assert_allclose(normalize_scores(np.array([1.0, 3.0, -1.0])), [0.5, 1.0, 0.0])

    def test_interpolation(self):
        ranking = context_filter_cr(BASE, CONTEXT, 0.5)
        assert ranking.apps == ("c", "a", "b")
        np.testing.assert_allclose(ranking.scores, [0.55, 0.45, 0.25])

    def test_weight_extremes(self):
        assert context_filter_cr(BASE, CONTEXT, 0.0).apps == ("a", "b", "c")
        assert context_filter_cr(BASE, CONTEXT, 1.0).apps == ("c", "a", "b")

    def test_empty_context_keeps_base_order(self):
        empty = UsageContextDistribution("u", 0, 100, {})
        assert context_filter_cr(BASE, empty, 0.7).apps == BASE.apps

    def test_weight_range(self):
        with pytest.raises(ValidationFailure):
            context_filter_cr(BASE, CONTEXT, 1.5)

    def test_tuning_picks_smallest_weight_that_helps(self):
        lam, table = tune_interpolation([BASE], [CONTEXT], ["c"])
        assert lam == pytest.approx(0.5)
        assert len(table) == 9
        assert table[0]["ndcg@3"] == pytest.approx(0.5)
