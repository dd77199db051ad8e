"""Selection and recommendation networks: gradients, training and checkpoints."""

import numpy as np
import pytest

from mobisearch.context import ContextIndex
from mobisearch.context.usage import UsageContextDistribution
from mobisearch.dataio.instances import RecommendationInstance
from mobisearch.dataio.text import PAD
from mobisearch.models import (
    CNTAS,
    NeuSA,
    SelectionExample,
    SelectionInstance,
    ablation_config,
    train_pairwise,
    train_pointwise,
)
from mobisearch.models.cntas import UNK_ROW
from mobisearch.numcore import gradient_check
from mobisearch.utils.errors import EmptyInputError, InputFormatError, ValidationFailure
from mobisearch.utils.models import RecommendationConfig, SelectionConfig

SMALL = {"d": 3, "hidden": (4, 3), "dropout": 0.0, "seed": 1}


def _example(i, user, tokens, target, seconds):
    return SelectionExample(
        instance_id=f"q{i}",
        user_id=user,
        timestamp=1000 + i,
        tokens=tuple(tokens),
        target=target,
        context=UsageContextDistribution(user, 0, 1000 + i, seconds),
    )


@pytest.fixture
def examples():
    return [
        _example(0, "u1", ["cheap", "flights"], "travel", {"mail": 30.0, "travel": 70.0}),
        _example(1, "u1", ["pasta", "recipe"], "cook", {"cook": 10.0}),
        _example(2, "u2", ["new", "mail", "inbox"], "mail", {"mail": 5.0, "news": 5.0}),
        _example(3, "u2", ["rome", "hotel"], "travel", {}),
    ]


def _separable(n_per_app=8):
    vocab = {"mail": ["inbox", "email"], "travel": ["flight", "hotel"], "cook": ["recipe", "pasta"]}
    built = []
    for app, words in vocab.items():
        for i in range(n_per_app):
            built.append(
                _example(len(built), f"u{i % 2}", [words[i % 2], words[(i + 1) % 2]], app, {app: 60.0})
            )
    return built


class TestSelectionGradients:
    @pytest.mark.parametrize("use_context", [True, False])
    def test_pointwise(self, examples, use_context):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL, use_context=use_context))
        instances = [SelectionInstance.of(e, app) for e in examples for app in ("travel", "cook", "mail")]
        report = gradient_check(lambda: model.pointwise_loss(instances), model.store)
        assert report.passed, report.errors

    def test_pairwise(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL, loss="pairwise"))
        pairs = [
            (SelectionInstance.of(e, e.target), SelectionInstance.of(e, neg))
            for e in examples
            for neg in ("travel", "cook", "mail")
            if neg != e.target
        ]
        report = gradient_check(lambda: model.pairwise_loss(pairs), model.store)
        assert report.passed, report.errors


class TestSelectionModel:
    def test_vocabulary_and_candidates_come_from_training(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL, min_count=1))
        assert model.candidates == ("cook", "mail", "travel")
        assert "news" in model.apps
        assert "inbox" in model.vocab

    def test_rare_terms_and_context_apps_share_unk(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL))
        assert model.apps == ("cook", "mail", "travel")
        assert model._row("news") == UNK_ROW
        assert "inbox" not in model.vocab

    def test_unk_rows_are_trained(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL, epochs=2))
        unk_term = model.vocab.unk_id
        context_before = model.store["context_app_embedding"].value[UNK_ROW].copy()
        term_before = model.store["term_embedding"].value[unk_term].copy()
        model.fit(examples)
        assert not np.allclose(model.store["context_app_embedding"].value[UNK_ROW], context_before)
        assert not np.allclose(model.store["term_embedding"].value[unk_term], term_before)

    def test_frozen_context_matrix_without_context(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL, use_context=False))
        assert not model.store["context_app_embedding"].trainable

    def test_rank_covers_every_candidate(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL))
        ranking = model.rank(("unseen", "words"), examples[0].context)
        assert sorted(ranking.apps) == ["cook", "mail", "travel"]
        assert list(ranking.scores) == sorted(ranking.scores, reverse=True)

    def test_user_candidates(self, examples):
        config = SelectionConfig(**SMALL, user_candidates=True)
        model = CNTAS.from_examples(examples, config)
        assert model.candidates_for("u1") == ("cook", "travel")
        assert model.candidates_for("stranger") == model.candidates

    def test_empty_query_has_no_representation(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL))
        with pytest.raises(EmptyInputError):
            model.represent_query(())

    def test_pair_members_must_differ(self, examples):
        model = CNTAS.from_examples(examples, SelectionConfig(**SMALL, loss="pairwise"))
        same = SelectionInstance.of(examples[0], "travel")
        with pytest.raises(ValidationFailure):
            model.pairwise_loss([(same, same)])

    def test_no_training_data(self):
        with pytest.raises(EmptyInputError):
            CNTAS.from_examples([], SelectionConfig(**SMALL))

    def test_learns_separable_queries(self):
        data = _separable()
        config = SelectionConfig(d=8, hidden=(16, 8), dropout=0.0, epochs=40, lr=0.02, batch=8, seed=0)
        model, curve = train_pointwise(data, config, validation=data)
        assert curve.best_value == pytest.approx(1.0)
        assert model.rank(("recipe",), data[-1].context).apps[0] == "cook"

    def test_pairwise_training_runs(self):
        data = _separable(4)
        config = SelectionConfig(d=4, hidden=(8, 4), dropout=0.1, epochs=3, seed=0)
        model, curve = train_pairwise(data, config, validation=data)
        assert model.pairwise
        assert len(curve.epochs) == 3

    def test_same_seed_same_parameters(self, examples):
        config = SelectionConfig(**{**SMALL, "dropout": 0.2}, epochs=2)
        first, _ = train_pointwise(examples, config)
        second, _ = train_pointwise(examples, config)
        for name in first.store.names():
            np.testing.assert_array_equal(first.store[name].value, second.store[name].value)

    def test_checkpoint_round_trip(self, tmp_path, examples):
        model, _ = train_pointwise(examples, SelectionConfig(**SMALL, epochs=1))
        model.save(tmp_path / "ckpt")
        loaded = CNTAS.load(tmp_path / "ckpt")
        query, context = examples[2].tokens, examples[2].context
        assert loaded.rank(query, context) == model.rank(query, context)

    def test_loading_the_wrong_model(self, tmp_path):
        model = NeuSA(RecommendationConfig(d=2, hidden=(2, 2)), ["a", "b"], ["u"])
        model.save(tmp_path / "ckpt")
        with pytest.raises(InputFormatError):
            CNTAS.load(tmp_path / "ckpt")


def _instance(i, user, t, window, label):
    return RecommendationInstance(
        instance_id=f"train:{user}:{i}",
        user_id=user,
        timestamp=t,
        window=tuple(window),
        label=label,
        last_seen=t - 60,
    )


@pytest.fixture
def rec_instances():
    return [
        _instance(0, "u1", 3600, [PAD, "a"], "b"),
        _instance(1, "u1", 7300, ["a", "b"], "c"),
        _instance(2, "u2", 40000, ["c", "a"], "a"),
        _instance(3, "u2", 80000, ["b", "zz"], "b"),
    ]


class TestRecommendationGradients:
    def test_all_features(self, rec_instances, make_events):
        config = RecommendationConfig(
            d=3, h=3, d_u=2, d_t=2, hidden=(4, 3), dropout=0.0, k=2, bin_usage_feature=True
        )
        model = NeuSA(config, ["a", "b", "c"], ["u1", "u2"])
        events = make_events("u1", [(100, "a"), (200, "b"), (4000, "c")]) + make_events(
            "u2", [(39000, "c"), (39100, "a")]
        )
        model.attach_context(ContextIndex.from_events(events))
        report = gradient_check(lambda: model.batch_loss(rec_instances), model.store)
        assert report.passed, report.errors

    @pytest.mark.parametrize("preset", ["no_user", "no_time", "no_user_no_time"])
    def test_ablations(self, rec_instances, preset):
        base = RecommendationConfig(d=3, h=2, d_u=2, d_t=2, hidden=(4, 3), dropout=0.0, k=2)
        model = NeuSA(ablation_config(base, preset), ["a", "b", "c"], ["u1", "u2"])
        report = gradient_check(lambda: model.batch_loss(rec_instances), model.store)
        assert report.passed, report.errors


def _cycle_instances(n=60, k=2):
    apps = ["a", "b", "c", "d"]
    seq = [apps[j % 4] for j in range(n)]
    return [
        _instance(j, "u1", 1000 + 120 * j, seq[j - k : j], seq[j]) for j in range(k, n)
    ]


class TestRecommendationModel:
    def test_input_width_follows_switches(self):
        config = RecommendationConfig(d=4, h=5, d_u=3, d_t=2, hidden=(4, 4), bin_usage_feature=True)
        assert NeuSA(config, ["a"], ["u"]).input_width == 5 + 3 + 2 + 4
        lean = ablation_config(config.model_copy(update={"bin_usage_feature": False}), "no_user_no_time")
        assert NeuSA(lean, ["a"], ["u"]).input_width == 5
        assert "user_embedding" not in NeuSA(lean, ["a"], ["u"]).store

    def test_lstm_biases_start_at_zero(self):
        model = NeuSA(RecommendationConfig(d=2, h=3, hidden=(2, 2)), ["a", "b"], ["u"])
        np.testing.assert_array_equal(model.store["lstm.b"].value, np.zeros(12))

    def test_rare_apps_are_not_classes(self, rec_instances):
        model = NeuSA.from_training(
            rec_instances, RecommendationConfig(d=2, hidden=(2, 2)), app_counts={"a": 5, "b": 2, "c": 1}
        )
        assert model.classes == ("a", "b")

    def test_unknown_labels_rank_zero(self, rec_instances):
        model = NeuSA(RecommendationConfig(d=2, hidden=(3, 3), k=2), ["a", "b"], ["u1", "u2"])
        ranks = model.ranks(rec_instances)
        assert ranks[1] == 0
        assert set(ranks[[0, 2, 3]]) <= {1, 2}

    def test_probabilities_sum_to_one(self, rec_instances):
        model = NeuSA(RecommendationConfig(d=2, hidden=(3, 3), k=2), ["a", "b", "c"], ["u1"])
        probs = model.predict_proba(rec_instances)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)

    def test_bin_feature_needs_context(self, rec_instances):
        config = RecommendationConfig(d=2, hidden=(3, 3), k=2, bin_usage_feature=True)
        with pytest.raises(ValidationFailure):
            NeuSA(config, ["a", "b"], ["u1"]).predict_proba(rec_instances)

    def test_learns_a_cycle(self, make_events):
        data = _cycle_instances()
        config = RecommendationConfig(d=8, hidden=(16, 8), dropout=0.0, k=2, epochs=40, lr=0.02, batch=8)
        model = NeuSA.from_training(data, config)
        curve = model.fit(data, data)
        assert curve.best_value == pytest.approx(1.0)
        history = make_events("u1", [(100, "c"), (200, "d")])
        assert model.recommend("u1", 300, history).apps[0] == "a"

    def test_training_without_predictable_labels(self, rec_instances):
        model = NeuSA(RecommendationConfig(d=2, hidden=(2, 2), k=2), ["q"], ["u1"])
        with pytest.raises(EmptyInputError):
            model.fit(rec_instances)

    def test_checkpoint_round_trip(self, tmp_path, rec_instances):
        config = RecommendationConfig(d=3, hidden=(4, 3), k=2, epochs=1, min_app_count=1)
        model = NeuSA.from_training(rec_instances, config, offsets={"u1": 3600})
        model.fit(rec_instances)
        model.save(tmp_path / "ckpt")
        loaded = NeuSA.load(tmp_path / "ckpt")
        assert loaded.offsets == {"u1": 3600}
        np.testing.assert_array_equal(loaded.predict_proba(rec_instances), model.predict_proba(rec_instances))

    def test_unknown_ablation(self):
        with pytest.raises(ValidationFailure):
            ablation_config(RecommendationConfig(), "no_everything")
