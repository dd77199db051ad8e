"""Parsing, tokenization, deduplication, sessions, splits and instances."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from mobisearch.dataio import parsing
from mobisearch.dataio.instances import build_recommendation_instances
from mobisearch.dataio.records import DatasetSplit, EventKind, QueryRecord, UsageEvent
from mobisearch.dataio.sessions import (
    dedup_usage,
    filter_top_apps,
    segment_sessions,
    sessionize,
    usage_records,
)
from mobisearch.dataio.splits import (
    chronological_counts,
    read_split,
    split_istas_r,
    split_istas_t,
    split_lsapp,
    write_split,
)
from mobisearch.dataio.text import PAD, UNK, Vocabulary, build_vocabulary, tokenize
from mobisearch.utils.errors import (
    EmptyInputError,
    InputFormatError,
    MissingResourceError,
    UnsortedInputError,
    ValidationFailure,
)


def _write(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestTokenize:
    def test_lowercases_and_strips_edge_punctuation(self):
        assert tokenize("Find  the 'Uber' ride!") == ["find", "the", "uber", "ride"]

    def test_inner_punctuation_is_kept(self):
        assert tokenize("e-mail o'clock") == ["e-mail", "o'clock"]

    def test_punctuation_only_tokens_vanish(self):
        assert tokenize("... ?? hi") == ["hi"]

    def test_no_stemming(self):
        assert tokenize("Recipes recipe") == ["recipes", "recipe"]


class TestVocabulary:
    def test_specials_first_then_sorted_tokens(self):
        vocab = Vocabulary.build([["b", "a"], ["a"]])
        assert vocab.id_to_token == [PAD, UNK, "a", "b"]
        assert vocab.doc_freq == {"a": 2, "b": 1}

    def test_min_count_drops_rare_tokens(self):
        vocab = Vocabulary.build([["b", "a"], ["a"]], min_count=2)
        assert "b" not in vocab
        assert vocab.lookup("b") == vocab.unk_id

    def test_document_frequency_counts_each_document_once(self):
        vocab = Vocabulary.build([["a", "a", "a"]])
        assert vocab.doc_freq["a"] == 1

    def test_build_vocabulary_without_specials(self):
        vocab = build_vocabulary([["b"], ["a", "b"]], specials=())
        assert vocab.id_to_token == ["a", "b"]
        assert vocab.unk_id is None

    def test_without_unk_unknown_tokens_raise(self):
        vocab = Vocabulary(["a"], specials=())
        with pytest.raises(KeyError):
            vocab.lookup("zzz")

    def test_dict_round_trip(self):
        vocab = Vocabulary.build([["x", "y"]])
        restored = Vocabulary.from_dict(vocab.to_dict())
        assert restored.id_to_token == vocab.id_to_token
        assert restored.encode(["y", "nope"]) == [3, 1]


class TestRecords:
    def test_blank_query_rejected(self):
        with pytest.raises(ValidationError):
            QueryRecord(user_id="u", timestamp=10, query="   ", target_app="a")

    def test_non_positive_timestamp_rejected(self):
        with pytest.raises(ValidationError):
            UsageEvent(user_id="u", timestamp=0, app_id="a", kind="launch")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            UsageEvent(user_id="u", timestamp=5, app_id="a", kind="swipe")

    def test_split_partition_lookup(self):
        split = DatasetSplit(name="lsapp", train=(0,), validation=(), test=(1,))
        assert split.partition("test") == (1,)
        assert split.sizes == {"train": 1, "validation": 0, "test": 1}
        with pytest.raises(KeyError):
            split.partition("holdout")


class TestParsing:
    def test_valid_query_log(self, tmp_path):
        path = _write(
            tmp_path / "queries.tsv",
            ["user_id\ttimestamp\tquery\ttarget_app", "u1\t100\tcheap flights\ttravel"],
        )
        report = parsing.parse_query_log(path)
        assert report.ok
        assert report.records[0].target_app == "travel"

    def test_bad_lines_reported_with_line_numbers(self, tmp_path):
        path = _write(
            tmp_path / "usage.tsv",
            [
                "user_id\ttimestamp\tapp_id\tkind",
                "u1\t100\tmail\tlaunch",
                "u1\tabc\tmail\tlaunch",
                "u1\t200\tmail",
                "u1\t300\tmail\tinteract",
            ],
        )
        report = parsing.parse_usage_log(path)
        assert [e.line for e in report.errors] == [3, 4]
        assert len(report.records) == 2
        assert report.error_dicts()[1]["message"] == "expected 4 fields, found 3"

    def test_invalid_utf8_is_a_line_error(self, tmp_path):
        path = tmp_path / "usage.tsv"
        path.write_bytes(
            b"user_id\ttimestamp\tapp_id\tkind\n"
            b"u1\t100\tmail\tlaunch\n"
            b"u1\t200\tm\xffil\tlaunch\n"
            b"u1\t300\tmail\tinteract\n"
        )
        report = parsing.parse_usage_log(path)
        assert len(report.records) == 2
        assert report.error_dicts() == [{"line": 3, "message": parsing.INVALID_UTF8}]

    def test_header_mismatch_raises(self, tmp_path):
        path = _write(tmp_path / "usage.tsv", ["user\ttime\tapp\tkind", "u1\t1\ta\tlaunch"])
        with pytest.raises(InputFormatError):
            parsing.parse_usage_log(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(MissingResourceError):
            parsing.parse_query_log(tmp_path / "absent.tsv")

    def test_stats_columns_map_to_fields(self, tmp_path):
        path = _write(
            tmp_path / "stats.tsv",
            ["user_id\tsnapshot_timestamp\tapp_id\tseconds_in_past_24h", "u1\t500\tmail\t12.5"],
        )
        stat = parsing.parse_stats_log(path).records[0]
        assert stat.timestamp == 500
        assert stat.seconds == 12.5

    def test_user_offsets_reject_non_integers(self, tmp_path):
        path = _write(tmp_path / "users.tsv", ["user_id\tutc_offset", "u1\t3600", "u2\tnoon"])
        with pytest.raises(InputFormatError) as info:
            parsing.parse_user_offsets(path)
        assert info.value.details["errors"][0]["line"] == 3

    def test_written_usage_parses_back(self, tmp_path, make_events):
        events = make_events("u1", [(10, "a"), (20, "b")])
        path = parsing.write_usage(tmp_path / "usage.tsv", events)
        assert parsing.parse_usage_log(path).records == events


class TestDedup:
    def test_merges_runs_and_keeps_first(self, make_events):
        events = make_events("u", [(100, "a"), (130, "a"), (170, "a"), (300, "b"), (330, "a")])
        kept = dedup_usage(events)
        assert [e.timestamp for e in kept] == [100, 300, 330]

    def test_dedup_is_idempotent(self, make_events):
        events = make_events(
            "u", [(100, "a"), (130, "a"), (170, "a"), (200, "b"), (215, "b"), (290, "b"), (300, "a")]
        )
        once = dedup_usage(events)
        assert dedup_usage(once) == once

    def test_sixty_seconds_apart_is_not_a_duplicate(self, make_events):
        events = make_events("u", [(100, "a"), (160, "a")])
        assert len(dedup_usage(events)) == 2

    def test_different_users_never_merge(self, make_events):
        events = make_events("u1", [(100, "a")]) + make_events("u2", [(110, "a")])
        assert len(dedup_usage(events)) == 2

    def test_unsorted_input_raises(self, make_events):
        events = make_events("u", [(200, "a"), (100, "b")])
        with pytest.raises(UnsortedInputError):
            dedup_usage(events)

    def test_usage_records_keep_only_usage_kinds(self):
        events = [
            UsageEvent(user_id="u", timestamp=300, app_id="a", kind=EventKind.CLOSE),
            UsageEvent(user_id="u", timestamp=100, app_id="a", kind=EventKind.LAUNCH),
            UsageEvent(user_id="u", timestamp=200, app_id="b", kind=EventKind.INTERACT),
            UsageEvent(user_id="u", timestamp=400, app_id="c", kind=EventKind.INSTALL),
        ]
        assert [e.app_id for e in usage_records(events)] == ["a", "b"]


class TestFilterTopApps:
    def test_keeps_most_frequent_with_id_tiebreak(self, make_events):
        events = make_events("u", [(1, "b"), (2, "a"), (3, "c"), (4, "c")])
        kept = filter_top_apps(events, 2)
        assert [e.app_id for e in kept] == ["a", "c", "c"]


class TestSessions:
    def test_splits_on_gaps_longer_than_threshold(self, make_events):
        events = make_events("u", [(100, "a"), (200, "b"), (501, "c"), (600, "d"), (1000, "e")])
        sessions = segment_sessions(events)
        assert [len(s) for s in sessions] == [2, 2, 1]
        assert sessions[1].start == 501 and sessions[1].end == 600

    def test_gap_equal_to_threshold_stays_in_session(self, make_events):
        events = make_events("u", [(100, "a"), (400, "b")])
        assert len(segment_sessions(events)) == 1

    def test_session_ids_are_global(self, make_events):
        events = make_events("u2", [(10, "a"), (1000, "b")]) + make_events("u1", [(5, "c")])
        sessions = sessionize(events)
        assert [(s.session_id, s.user_id) for s in sessions] == [(0, "u1"), (1, "u2"), (2, "u2")]


class TestSplits:
    @pytest.mark.parametrize(
        ("n", "expected"),
        [(10, (7, 1, 2)), (5, (3, 1, 1)), (3, (2, 0, 1)), (2, (1, 0, 1)), (1, (1, 0, 0)), (0, (0, 0, 0))],
    )
    def test_chronological_counts(self, n, expected):
        assert chronological_counts(n) == expected

    def test_random_split_is_a_seeded_partition(self):
        records = list(range(10))
        first = split_istas_r(records, seed=4)
        again = split_istas_r(records, seed=4)
        assert first == again
        assert first.sizes == {"train": 7, "validation": 1, "test": 2}
        assert sorted(first.train + first.validation + first.test) == records

    def test_random_split_rejects_bad_ratios(self):
        with pytest.raises(ValidationFailure):
            split_istas_r([1, 2, 3], ratios=(0.5, 0.5, 0.5))

    def test_empty_input_raises(self):
        with pytest.raises(EmptyInputError):
            split_istas_t([])

    def test_chronological_split_is_per_user(self, make_events):
        events = make_events("u1", [(t, "a") for t in range(10, 110, 10)]) + make_events(
            "u2", [(5, "a"), (6, "b")]
        )
        split = split_lsapp(events)
        assert split.train == (0, 1, 2, 3, 4, 5, 6, 10)
        assert split.validation == (7,)
        assert split.test == (8, 9, 11)

    def test_every_train_record_precedes_the_users_test_records(self, query_records):
        split = split_istas_t(query_records)
        for i in split.train:
            for j in split.test:
                if query_records[i].user_id == query_records[j].user_id:
                    assert query_records[i].timestamp <= query_records[j].timestamp

    def test_split_file_round_trip(self, tmp_path):
        split = split_istas_r(list(range(20)), seed=9)
        assert read_split(write_split(split, tmp_path / "r.split")) == split

    def test_malformed_split_line(self, tmp_path):
        path = _write(tmp_path / "bad.split", ['{"name": "lsapp"}', "train\tx"])
        with pytest.raises(InputFormatError):
            read_split(path)


class TestInstances:
    def test_windows_stay_inside_their_partition(self, make_events):
        events = make_events("u", [(10, "a"), (20, "b"), (30, "c"), (40, "d")])
        split = DatasetSplit(name="lsapp", train=(0, 1, 2), validation=(), test=(3,))
        built = build_recommendation_instances(events, split, k=2)
        assert [(i.window, i.label) for i in built["train"]] == [(("a", "b"), "c")]
        assert built["test"] == []

    def test_short_history_is_padded_at_the_oldest_positions(self, make_events):
        events = make_events("u", [(10, "a"), (20, "b"), (30, "c")])
        split = DatasetSplit(name="lsapp", train=(0, 1, 2), validation=(), test=())
        built = build_recommendation_instances(events, split, k=3, min_history=1)["train"]
        assert built[0].window == (PAD, PAD, "a")
        assert built[0].instance_id == "train:u:1"
        assert built[1].last_seen == 20
