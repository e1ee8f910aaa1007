import json

import pytest

from instructforge.config import PipelineConfig
from instructforge.providers import ProviderSpec


def spec(role, name, behavior=None, **kwargs):
    mock_behavior = dict(behavior) if behavior else {}
    return ProviderSpec(role=role, name=name, kind="mock",
                        mock_behavior=mock_behavior, **kwargs)


def make_config(tmp_path, rewriters=(), transcribers=None, embedders=None, **kwargs):
    if transcribers is None:
        transcribers = (spec("transcriber", "oracle"),)
    if embedders is None:
        embedders = (spec("embedder", "emb-a"),
                     spec("embedder", "emb-b", {"behavior": "char_ngram", "dim": 128}))
    defaults = dict(
        rewriter_specs=tuple(rewriters),
        synthesizer_spec=spec("synthesizer", "mock-tts"),
        transcriber_specs=tuple(transcribers),
        embedder_specs=tuple(embedders),
        cache_dir=str(tmp_path / "cache"),
        manifest_path=str(tmp_path / "manifest.jsonl"),
    )
    defaults.update(kwargs)
    return PipelineConfig(**defaults)


def write_corpus(path, questions, **extra_fields):
    with open(path, "w", encoding="utf-8") as fh:
        for item in questions:
            obj = dict(item) if isinstance(item, dict) else {"question": item}
            obj.update(extra_fields)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def corpus_file(tmp_path):
    def _make(questions, name="corpus.jsonl", **extra):
        return write_corpus(tmp_path / name, questions, **extra)
    return _make
