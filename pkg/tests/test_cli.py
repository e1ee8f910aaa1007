import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from instructforge import cli, pipeline
from instructforge.pipeline import BatchState

from conftest import write_corpus

QUESTIONS = [
    {"question": "What happened in 1999?", "answer": "nothing", "context": "doc one"},
    {"question": "Who won in 1987?", "answer": "they did", "context": "doc two"},
    {"question": "Plain question with no digits?", "answer": "yes", "context": "doc three"},
]


@pytest.fixture
def runner():
    return CliRunner()


def _write_config(tmp_path, **top_level):
    lines = [
        'cache_dir = "{}"'.format(tmp_path / "cache"),
        'manifest_path = "{}"'.format(tmp_path / "manifest.jsonl"),
        "max_parallel_requests = 1",
        "seed = 42",
    ]
    lines += [f"{k} = {v}" for k, v in top_level.items()]
    lines += [
        "[providers.synthesizer]",
        'name = "tts"',
        "[[providers.rewriters]]",
        'name = "num"',
        'mock_behavior = {behavior = "number_expander"}',
        "[[providers.transcribers]]",
        'name = "oracle"',
        "[[providers.embedders]]",
        'name = "emb-a"',
        "[[providers.embedders]]",
        'name = "emb-b"',
        'mock_behavior = {behavior = "char_ngram", dim = 128}',
    ]
    path = tmp_path / "config.toml"
    path.write_text("\n".join(lines) + "\n")
    return path


def _synthesized(runner, tmp_path):
    config = _write_config(tmp_path)
    corpus = write_corpus(tmp_path / "corpus.jsonl", QUESTIONS)
    result = runner.invoke(cli.main, ["synthesize", "--config", str(config),
                                      "--corpus", str(corpus), "--json"])
    assert result.exit_code == 0, result.output
    return config, json.loads(result.output)["manifest"]


class TestCost:
    def test_known_total_on_stdout(self, runner):
        result = runner.invoke(cli.main, ["cost", "--human-hours", "562",
                                          "--gpu-hours", "0"])
        assert result.exit_code == 0
        assert result.output.strip() == "4215.00"

    def test_json_output(self, runner):
        result = runner.invoke(cli.main, ["cost", "--human-hours", "0",
                                          "--gpu-hours", "127", "--json"])
        assert json.loads(result.output) == {"total": "53.34"}

    def test_custom_rates(self, runner):
        result = runner.invoke(cli.main, ["cost", "--human-hours", "1",
                                          "--gpu-hours", "1",
                                          "--human-rate", "10", "--gpu-rate", "2"])
        assert result.output.strip() == "12.00"

    def test_negative_hours_exit_one(self, runner):
        result = runner.invoke(cli.main, ["cost", "--human-hours", "-5",
                                          "--gpu-hours", "0"])
        assert result.exit_code == 1

    def test_bad_rate_exit_one(self, runner):
        result = runner.invoke(cli.main, ["cost", "--human-hours", "1",
                                          "--gpu-hours", "0", "--human-rate", "bogus"])
        assert result.exit_code == 1


class TestSynthesize:
    def test_end_to_end_summary(self, runner, tmp_path):
        config = _write_config(tmp_path)
        corpus = write_corpus(tmp_path / "corpus.jsonl", QUESTIONS)
        result = runner.invoke(cli.main, ["synthesize", "--config", str(config),
                                          "--corpus", str(corpus), "--json"])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["loaded"] == 3
        assert summary["scored"] == 3
        assert summary["failed"] == 0
        assert summary["sim"] == 100.0
        assert summary["pass_rate"] == 1.0
        assert Path(summary["manifest"]).exists()

    def test_repeat_run_is_byte_identical(self, runner, tmp_path):
        config = _write_config(tmp_path)
        corpus = write_corpus(tmp_path / "corpus.jsonl", QUESTIONS)
        args = ["synthesize", "--config", str(config), "--corpus", str(corpus)]
        first = runner.invoke(cli.main, args)
        manifest = Path(tmp_path / "manifest.jsonl")
        bytes_one = manifest.read_bytes()
        second = runner.invoke(cli.main, args)
        assert first.exit_code == second.exit_code == 0
        assert manifest.read_bytes() == bytes_one

    def test_missing_corpus_exit_two_usage(self, runner, tmp_path):
        config = _write_config(tmp_path)
        result = runner.invoke(cli.main, ["synthesize", "--config", str(config),
                                          "--corpus", str(tmp_path / "nope.jsonl")])
        assert result.exit_code != 0

    def test_malformed_corpus_is_a_config_error(self, runner, tmp_path):
        config = _write_config(tmp_path)
        corpus = tmp_path / "bad.jsonl"
        corpus.write_text('{"question": "ok?"}\nnot json\n')
        result = runner.invoke(cli.main, ["synthesize", "--config", str(config),
                                          "--corpus", str(corpus)])
        assert result.exit_code == 1

    def test_incomplete_config_exit_one(self, runner, tmp_path):
        config = tmp_path / "c.toml"
        config.write_text('alpha = 0.9\n')  # no providers at all
        corpus = write_corpus(tmp_path / "corpus.jsonl", QUESTIONS)
        result = runner.invoke(cli.main, ["synthesize", "--config", str(config),
                                          "--corpus", str(corpus)])
        assert result.exit_code == 1

    def test_partial_failure_exit_two(self, runner, tmp_path, monkeypatch):
        def fake_run_batch(corpus, config, tag):
            return str(tmp_path / "m.jsonl"), BatchState(loaded=2, scored=1, failed=1)
        monkeypatch.setattr(pipeline, "run_batch", fake_run_batch)
        config = _write_config(tmp_path)
        corpus = write_corpus(tmp_path / "corpus.jsonl", QUESTIONS)
        result = runner.invoke(cli.main, ["synthesize", "--config", str(config),
                                          "--corpus", str(corpus)])
        assert result.exit_code == 2


class TestReport:
    def test_table_output(self, runner, tmp_path):
        _, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["report", "--manifest", manifest])
        assert result.exit_code == 0
        assert result.output.startswith("Dataset")
        assert "default" in result.output

    def test_json_output(self, runner, tmp_path):
        _, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["report", "--manifest", manifest, "--json"])
        rep = json.loads(result.output)
        assert rep["rows"][0]["sim"] == 100.0
        assert rep["rows"][0]["pass"] == 1.0

    def test_empty_manifest_exit_one_with_json_error(self, runner, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        result = runner.invoke(cli.main, ["report", "--manifest", str(empty), "--json"])
        assert result.exit_code == 1
        assert "error" in json.loads(result.stdout)


class TestScoreAndConsistency:
    def test_rescore_with_alpha_override(self, runner, tmp_path):
        config, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["score", "--config", str(config),
                                          "--manifest", manifest,
                                          "--alpha", "1.0", "--json"])
        assert result.exit_code == 0
        summary = json.loads(result.output)
        assert summary["pass_rate"] == 0.0

    def test_consistency_single_transcriber_errors(self, runner, tmp_path):
        # with one transcriber per record there is nothing to compare
        _, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["consistency", "--manifest", manifest])
        assert result.exit_code == 1


class TestFilterAndExport:
    def test_filter_lists_all_passing_ids(self, runner, tmp_path):
        _, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["filter", "--manifest", manifest, "--json"])
        assert result.exit_code == 0
        assert json.loads(result.output)["count"] == 3

    def test_filter_percent_unit(self, runner, tmp_path):
        _, manifest = _synthesized(runner, tmp_path)
        as_fraction = runner.invoke(cli.main, ["filter", "--manifest", manifest,
                                               "--threshold", "0.9", "--json"])
        as_percent = runner.invoke(cli.main, ["filter", "--manifest", manifest,
                                              "--threshold", "90", "--threshold-unit",
                                              "percent", "--json"])
        assert json.loads(as_fraction.output) == json.loads(as_percent.output)

    def test_export_golden(self, runner, tmp_path):
        _, manifest = _synthesized(runner, tmp_path)
        out = tmp_path / "chat.jsonl"
        result = runner.invoke(cli.main, ["export", "--manifest", manifest,
                                          "--out", str(out), "--json"])
        assert result.exit_code == 0
        assert json.loads(result.output)["written"] == 3
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert {r["response"] for r in rows} == {"nothing", "they did", "yes"}

    def test_export_continue_requires_continuations(self, runner, tmp_path):
        _, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["export", "--manifest", manifest,
                                          "--out", str(tmp_path / "c.jsonl"),
                                          "--mode", "continue"])
        assert result.exit_code == 1

    def test_export_continue_mode(self, runner, tmp_path):
        _, manifest = _synthesized(runner, tmp_path)
        cont = tmp_path / "cont.jsonl"
        cont.write_text('{"id": "default-1", "response": "model says hi"}\n')
        out = tmp_path / "chat.jsonl"
        result = runner.invoke(cli.main, ["export", "--manifest", manifest,
                                          "--out", str(out), "--mode", "continue",
                                          "--continuations", str(cont), "--json"])
        assert result.exit_code == 0
        summary = json.loads(result.output)
        assert summary["written"] == 1
        assert summary["skipped"] == 2


class TestFuse:
    def test_extract_without_successes_exit_one(self, runner, tmp_path):
        # every record passes via the original, so there is nothing to learn
        config, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["fuse-extract", "--config", str(config),
                                          "--manifest", manifest,
                                          "--out", str(tmp_path / "train.jsonl")])
        assert result.exit_code == 1

    def test_apply_noop_when_nothing_failed(self, runner, tmp_path):
        config, manifest = _synthesized(runner, tmp_path)
        result = runner.invoke(cli.main, ["fuse-apply", "--config", str(config),
                                          "--manifest", manifest,
                                          "--fused-mock-behavior", "number_expander",
                                          "--json"])
        assert result.exit_code == 0
        assert json.loads(result.output)["records_retried"] == 0


class TestHelp:
    def test_lists_all_subcommands(self, runner):
        result = runner.invoke(cli.main, ["--help"])
        for command in ("synthesize", "score", "report", "consistency",
                        "fuse-extract", "fuse-apply", "filter", "export", "cost"):
            assert command in result.output

    def test_synthesize_flags_documented(self, runner):
        result = runner.invoke(cli.main, ["synthesize", "--help"])
        for flag in ("--config", "--corpus", "--dataset-tag", "--seed",
                     "--manifest", "--json"):
            assert flag in result.output

    def test_export_flags_documented(self, runner):
        result = runner.invoke(cli.main, ["export", "--help"])
        for flag in ("--manifest", "--out", "--mode", "--threshold",
                     "--threshold-unit", "--continuations", "--bundle"):
            assert flag in result.output
