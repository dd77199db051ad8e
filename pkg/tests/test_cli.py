"""End-to-end runs of the command line on a small generated dataset."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from mobisearch.__main__ import cli
from mobisearch.core import PipelineHandler
from mobisearch.utils.errors import exit_code_for

pytestmark = pytest.mark.integration

SYNTH_ARGS = [
    "--num-users",
    "3",
    "--num-apps",
    "4",
    "--events-per-user",
    "60",
    "--queries-per-user",
    "20",
    "--chain",
    "cycle",
]
TINY = ["--d", "4", "--hidden", "8,4", "--epochs", "2", "--batch", "16"]


def invoke(*args: str, seed: int = 7):
    """Run the CLI and return (exit code, envelope)."""
    result = CliRunner().invoke(cli, ["--seed", str(seed), *args])
    lines = [line for line in result.output.splitlines() if line.startswith("{")]
    assert lines, result.output
    return result.exit_code, json.loads(lines[-1])


def manifest(directory: Path) -> dict:
    return json.loads((directory / "manifest.json").read_text(encoding="utf-8"))


@pytest.fixture
def data(tmp_path):
    code, envelope = invoke("synth", "--out-dir", str(tmp_path / "data"), *SYNTH_ARGS)
    assert code == 0, envelope
    return tmp_path / "data"


@pytest.fixture
def query_split(tmp_path, data):
    out = tmp_path / "splits"
    code, envelope = invoke("split", "--data-dir", str(data), "--out-dir", str(out), "--strategy", "istas_r")
    assert code == 0, envelope
    return out / "istas_r-seed7.split"


@pytest.fixture
def usage_split(tmp_path, data):
    out = tmp_path / "usage_splits"
    code, envelope = invoke("split", "--data-dir", str(data), "--out-dir", str(out), "--strategy", "lsapp")
    assert code == 0, envelope
    return out / "lsapp.split"


class TestSynth:
    def test_writes_dataset_and_manifest(self, data):
        for name in ("queries.tsv", "usage.tsv", "stats.tsv", "users.tsv", "categories.tsv", "ground_truth.json"):
            assert (data / name).is_file()
        recorded = manifest(data)
        assert recorded["command"] == "synth"
        assert recorded["seed"] == 7
        assert recorded["config"]["spec"]["num_apps"] == 4

    def test_same_seed_same_files(self, tmp_path, data):
        invoke("synth", "--out-dir", str(tmp_path / "again"), *SYNTH_ARGS)
        for name in ("queries.tsv", "usage.tsv", "ground_truth.json"):
            assert (tmp_path / "again" / name).read_bytes() == (data / name).read_bytes()

    def test_invalid_generator_knobs(self, tmp_path):
        code, envelope = invoke("synth", "--out-dir", str(tmp_path / "x"), "--chain", "cycle", "--order", "3")
        assert code == 2
        assert envelope["error"]["code"] == "VALIDATION_ERROR"


class TestIngest:
    def test_normalizes_files(self, tmp_path, data):
        code, envelope = invoke("ingest", "--data-dir", str(data), "--out-dir", str(tmp_path / "clean"))
        assert code == 0
        assert envelope["data"]["records"]["queries"] == 60
        assert envelope["data"]["records"]["usage"] == 180
        assert (tmp_path / "clean" / "categories.tsv").is_file()

    def test_malformed_lines(self, tmp_path, data):
        raw = tmp_path / "raw"
        raw.mkdir()
        text = (data / "queries.tsv").read_text(encoding="utf-8")
        (raw / "queries.tsv").write_text(text + "broken\tline\n", encoding="utf-8")

        code, envelope = invoke("ingest", "--data-dir", str(raw), "--out-dir", str(tmp_path / "out"))
        assert code == 2
        assert envelope["error"]["code"] == "INPUT_FORMAT_ERROR"

        code, envelope = invoke(
            "ingest", "--data-dir", str(raw), "--out-dir", str(tmp_path / "out"), "--allow-errors"
        )
        assert code == 0
        assert envelope["data"]["skipped_lines"]["queries"] == 1

    def test_undecodable_bytes_are_malformed_lines(self, tmp_path, data):
        raw = tmp_path / "raw"
        raw.mkdir()
        (raw / "usage.tsv").write_bytes((data / "usage.tsv").read_bytes() + b"u000\t1\t\xff\tlaunch\n")

        code, envelope = invoke("ingest", "--data-dir", str(raw), "--out-dir", str(tmp_path / "out"))
        assert code == 2
        assert envelope["error"]["details"]["errors"][0]["message"] == "line is not valid UTF-8"

        code, envelope = invoke(
            "ingest", "--data-dir", str(raw), "--out-dir", str(tmp_path / "out"), "--allow-errors"
        )
        assert code == 0
        assert envelope["data"]["skipped_lines"]["usage"] == 1

    def test_missing_directory(self, tmp_path):
        code, envelope = invoke("ingest", "--data-dir", str(tmp_path / "nowhere"), "--out-dir", str(tmp_path / "o"))
        assert code == 2
        assert envelope["error"]["code"] == "MISSING_RESOURCE"


class TestSplit:
    def test_random_split_sizes(self, query_split):
        header = json.loads(query_split.read_text(encoding="utf-8").splitlines()[0])
        assert header["name"] == "istas_r"
        assert header["seed"] == 7

    def test_repeats(self, tmp_path, data):
        out = tmp_path / "many"
        code, envelope = invoke(
            "split", "--data-dir", str(data), "--out-dir", str(out), "--strategy", "istas_r", "--repeats", "2"
        )
        assert code == 0
        assert [s["seed"] for s in envelope["data"]["splits"]] == [7, 8]
        assert sorted(p.name for p in out.glob("*.split")) == ["istas_r-seed7.split", "istas_r-seed8.split"]


class TestSelectionPipeline:
    def test_train_eval_predict(self, tmp_path, data, query_split):
        run = tmp_path / "cntas"
        code, envelope = invoke(
            "train", "--model", "cntas", "--data-dir", str(data), "--split", str(query_split), "--out-dir", str(run), *TINY
        )
        assert code == 0, envelope
        assert (run / "checkpoint" / "params.bin").is_file()
        assert (run / "curve.json").is_file()
        assert manifest(run)["seed"] == 7

        out = tmp_path / "eval"
        code, envelope = invoke(
            "eval",
            "--task",
            "selection",
            "--data-dir",
            str(data),
            "--split",
            str(query_split),
            "--out-dir",
            str(out),
            "--checkpoint",
            str(run),
            "--baseline",
            "mfu",
            "--baseline",
            "bm25-cr",
            "--oracle",
        )
        assert code == 0, envelope
        systems = {row["system"]: row for row in envelope["data"]["runs"][0]["systems"]}
        assert set(systems) == {"cntas-pointwise", "mfu", "bm25-cr", "oracle"}
        assert systems["oracle"]["mrr"] == pytest.approx(1.0)
        for name in ("results.tsv", "results.json", "significance.tsv", "breakdown_app.tsv", "length_buckets.tsv"):
            assert (out / name).is_file()
        assert manifest(out)["seed"] == 7

        code, envelope = invoke(
            "predict",
            "--checkpoint",
            str(run),
            "--data-dir",
            str(data),
            "--user",
            "u000",
            "--timestamp",
            "1600000000",
            "--query",
            "w1_0 w1_1",
            "--top-k",
            "2",
        )
        assert code == 0, envelope
        assert envelope["data"]["model"] == "cntas"
        assert len(envelope["data"]["apps"]) == 2

    def test_predict_needs_a_query(self, tmp_path, data, query_split):
        run = tmp_path / "cntas"
        invoke("train", "--model", "cntas", "--data-dir", str(data), "--split", str(query_split), "--out-dir", str(run), *TINY)
        code, envelope = invoke(
            "predict", "--checkpoint", str(run), "--data-dir", str(data), "--user", "u000", "--timestamp", "1600000000"
        )
        assert code == 2
        assert envelope["error"]["code"] == "VALIDATION_ERROR"

    def test_retraining_is_bit_identical(self, tmp_path, data, query_split):
        blobs = []
        for name in ("first", "second"):
            run = tmp_path / name
            invoke("train", "--model", "cntas", "--data-dir", str(data), "--split", str(query_split), "--out-dir", str(run), *TINY)
            blobs.append((run / "checkpoint" / "params.bin").read_bytes())
        assert blobs[0] == blobs[1]

    def test_flags_override_the_config_file(self, tmp_path, data, query_split):
        config = tmp_path / "cntas.env"
        config.write_text("D=3\nHIDDEN=6,3\nEPOCHS=1\nNEGATIVES=2\n", encoding="utf-8")
        run = tmp_path / "run"
        result = CliRunner().invoke(
            cli,
            [
                "--seed",
                "7",
                "--config",
                str(config),
                "train",
                "--model",
                "cntas",
                "--data-dir",
                str(data),
                "--split",
                str(query_split),
                "--out-dir",
                str(run),
                "--epochs",
                "2",
            ],
        )
        assert result.exit_code == 0, result.output
        effective = manifest(run)["config"]["config"]
        assert effective["d"] == 3
        assert effective["negatives"] == 2
        assert effective["epochs"] == 2
        assert effective["seed"] == 7

    def test_repeated_splits_are_aggregated(self, tmp_path, data):
        splits = tmp_path / "many"
        invoke("split", "--data-dir", str(data), "--out-dir", str(splits), "--strategy", "istas_r", "--repeats", "2")
        out = tmp_path / "eval"
        code, envelope = invoke(
            "eval", "--task", "selection", "--data-dir", str(data), "--split", str(splits), "--out-dir", str(out),
            "--baseline", "mfu", "--baseline", "querylm",
        )
        assert code == 0, envelope
        assert (out / "istas_r-seed7" / "results.tsv").is_file()
        assert (out / "istas_r-seed8" / "results.tsv").is_file()
        assert [row["system"] for row in envelope["data"]["aggregate"]] == ["mfu", "querylm"]
        assert all(row["runs"] == 2 for row in envelope["data"]["aggregate"])

    def test_external_predictions(self, tmp_path):
        predictions = tmp_path / "preds.jsonl"
        predictions.write_text(
            '{"id": "a", "relevant": "x", "ranking": ["x", "y"]}\n'
            '{"id": "b", "relevant": "y", "ranking": ["x", "y"]}\n',
            encoding="utf-8",
        )
        code, envelope = invoke("eval", "--task", "selection", "--predictions", str(predictions), "--out-dir", str(tmp_path / "e"))
        assert code == 0, envelope
        assert envelope["data"]["systems"][0]["mrr"] == pytest.approx(0.75)

    def test_eval_needs_a_split_or_predictions(self, tmp_path):
        code, envelope = invoke("eval", "--task", "selection", "--out-dir", str(tmp_path / "e"))
        assert code == 2
        assert envelope["error"]["code"] == "VALIDATION_ERROR"


class TestRecommendationPipeline:
    def test_train_eval_predict(self, tmp_path, data, usage_split):
        run = tmp_path / "neusa"
        code, envelope = invoke(
            "train", "--model", "neusa", "--data-dir", str(data), "--split", str(usage_split), "--out-dir", str(run),
            "--k", "2", *TINY,
        )
        assert code == 0, envelope
        assert envelope["data"]["metric"] == "mrr"

        out = tmp_path / "eval"
        code, envelope = invoke(
            "eval", "--task", "recommendation", "--data-dir", str(data), "--split", str(usage_split),
            "--out-dir", str(out), "--checkpoint", str(run), "--baseline", "mfu", "--baseline", "mru", "--oracle",
        )
        assert code == 0, envelope
        systems = {row["system"]: row for row in envelope["data"]["runs"][0]["systems"]}
        assert set(systems) == {"neusa-k2", "mfu", "mru", "oracle"}
        assert systems["oracle"]["mrr"] == pytest.approx(1.0)
        assert len({row["instances"] for row in systems.values()}) == 1

        code, envelope = invoke(
            "predict", "--checkpoint", str(run), "--data-dir", str(data), "--user", "u001", "--timestamp", "1600000000"
        )
        assert code == 0, envelope
        assert envelope["data"]["model"] == "neusa"

    def test_bin_usage_checkpoint(self, tmp_path, data, usage_split):
        run = tmp_path / "neusa-bins"
        code, envelope = invoke(
            "train", "--model", "neusa", "--data-dir", str(data), "--split", str(usage_split), "--out-dir", str(run),
            "--k", "2", "--bin-usage", *TINY,
        )
        assert code == 0, envelope

        code, envelope = invoke(
            "eval", "--task", "recommendation", "--data-dir", str(data), "--split", str(usage_split),
            "--out-dir", str(tmp_path / "eval"), "--checkpoint", str(run),
        )
        assert code == 0, envelope
        assert [row["system"] for row in envelope["data"]["runs"][0]["systems"]] == ["neusa-k2"]

        code, envelope = invoke(
            "predict", "--checkpoint", str(run), "--data-dir", str(data), "--user", "u001", "--timestamp", "1600000000"
        )
        assert code == 0, envelope

    def test_unknown_baseline(self, tmp_path, data, usage_split):
        code, envelope = invoke(
            "eval", "--task", "recommendation", "--data-dir", str(data), "--split", str(usage_split),
            "--out-dir", str(tmp_path / "e"), "--baseline", "bm25",
        )
        assert code == 2
        assert envelope["error"]["details"]["choices"] == ["mfu", "mru"]


class TestAnalyze:
    def test_reports(self, tmp_path, data):
        out = tmp_path / "analysis"
        code, envelope = invoke("analyze", "--data-dir", str(data), "--out-dir", str(out))
        assert code == 0, envelope
        assert envelope["data"]["sections"] == ["queries", "usage"]
        for name in (
            "report.json",
            "query_overlap.tsv",
            "query_lengths.tsv",
            "transitions_app.tsv",
            "transitions_category.tsv",
            "cooccurrence.tsv",
        ):
            assert (out / name).is_file()


class TestEnvelopes:
    def test_handler_rejects_unknown_arguments(self, tmp_path):
        envelope = PipelineHandler().handle_split(
            {"data_dir": tmp_path, "out_dir": tmp_path, "strategy": "istas_r", "colour": "red"}
        )
        assert envelope["ok"] is False
        assert envelope["error"]["code"] == "VALIDATION_ERROR"

    @pytest.mark.parametrize(
        ("code", "expected"),
        [
            ("VALIDATION_ERROR", 2),
            ("MISSING_RESOURCE", 2),
            ("UNSORTED_INPUT", 2),
            ("TRAINING_DIVERGED", 3),
            ("NON_FINITE_GRADIENT", 3),
            ("INTERNAL_ERROR", 3),
        ],
    )
    def test_exit_codes(self, code, expected):
        assert exit_code_for({"ok": False, "error": {"code": code}}) == expected

    def test_success_exits_zero(self):
        assert exit_code_for({"ok": True, "data": {}}) == 0
