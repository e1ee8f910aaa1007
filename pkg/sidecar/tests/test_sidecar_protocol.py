"""Wire-protocol conformance for the sidecar service: the shared
golden-fixture suite plus service-specific checks."""

import base64
import io
import json
import unicodedata
import wave
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from sidecar.app import create_app
from sidecar.config import SidecarConfig

FIXTURES = json.loads(
    (Path(__file__).resolve().parents[2] / "protocol_fixtures/fixtures.json").read_text())


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(SidecarConfig()))


@pytest.fixture(scope="module")
def crippled_client():
    config = SidecarConfig(models={"embedder": ""})
    return TestClient(create_app(config))


def _normalized_tokens(text: str) -> list[str]:
    text = "".join(ch for ch in text.lower()
                   if not unicodedata.category(ch).startswith("P"))
    return text.split()


def _check_fields(payload: dict, fields: dict):
    for name, kind in fields.items():
        assert name in payload, f"missing field {name}"
        value = payload[name]
        if kind == "string":
            assert isinstance(value, str)
        elif kind == "int":
            assert isinstance(value, int)
        elif kind == "float_array":
            assert isinstance(value, list) and value
            assert all(isinstance(x, (int, float)) for x in value)
        elif kind == "wav_b64":
            raw = base64.b64decode(value)
            with wave.open(io.BytesIO(raw), "rb") as wf:
                assert wf.getnchannels() == 1
                assert wf.getsampwidth() == 2
        else:
            raise AssertionError(f"unknown field kind {kind}")


def run_fixture(fixture: dict, client: TestClient):
    if fixture.get("type") == "roundtrip":
        synth = client.post("/v1/synthesize",
                            json={"text": fixture["text"],
                                  "description": fixture["description"]})
        assert synth.status_code == 200
        asr = client.post("/v1/transcribe",
                          json={"audio_b64": synth.json()["audio_b64"],
                                "sample_rate": synth.json()["sample_rate"]})
        assert asr.status_code == 200
        # WER 0 under default normalization == identical token sequences
        assert _normalized_tokens(asr.json()["text"]) == \
            _normalized_tokens(fixture["text"])
        return

    responses = []
    for _ in range(fixture.get("repeat", 1)):
        if "raw_body" in fixture:
            resp = client.post(fixture["path"], content=fixture["raw_body"],
                               headers={"Content-Type": "application/json"})
        else:
            resp = client.post(fixture["path"], json=fixture["body"])
        assert resp.status_code == fixture["expect"]["status"], \
            f"{fixture['name']}: got {resp.status_code}, body {resp.text[:200]}"
        payload = resp.json()
        _check_fields(payload, fixture["expect"].get("fields", {}))
        responses.append(payload)
    if len(responses) > 1:
        assert all(r == responses[0] for r in responses), "non-deterministic response"


@pytest.mark.parametrize("fixture", FIXTURES, ids=lambda f: f["name"])
def test_golden_fixture(fixture, client, crippled_client):
    target = crippled_client if fixture.get("requires_disabled_role") else client
    run_fixture(fixture, target)


def test_healthz_lists_loaded_roles(client, crippled_client):
    full = client.get("/healthz").json()
    assert full["roles"] == ["embedder", "rewriter", "synthesizer", "transcriber"]
    partial = crippled_client.get("/healthz").json()
    assert "embedder" not in partial["roles"]


def test_five_word_roundtrip_wer_zero(client):
    sentence = "the quick brown fox jumps"
    synth = client.post("/v1/synthesize",
                        json={"text": sentence, "description": "a calm voice"})
    asr = client.post("/v1/transcribe", json=synth.json() | {})
    assert _normalized_tokens(asr.json()["text"]) == sentence.split()


def test_embed_dimension_constant_across_requests(client):
    dims = {len(client.post("/v1/embed", json={"text": t}).json()["values"])
            for t in ("a", "a much longer piece of text", "1999", "  spaced  ")}
    assert len(dims) == 1


def test_rewriter_spells_digits(client):
    resp = client.post("/v1/rewrite",
                       json={"prompt": "spell the numbers", "text": "call 911 now"})
    assert resp.json()["text"] == "call nine one one now"

def test_unknown_hf_model_disables_role_gracefully():
    config = SidecarConfig(models={"embedder": "definitely/not-a-real-model"})
    app_client = TestClient(create_app(config))
    health = app_client.get("/healthz").json()
    assert "embedder" not in health["roles"]
    resp = app_client.post("/v1/embed", json={"text": "hi"})
    assert resp.status_code == 501
    # the other roles keep working
    assert app_client.post("/v1/rewrite",
                           json={"prompt": "p", "text": "t"}).status_code == 200


def test_bad_base64_audio_is_a_400(client):
    resp = client.post("/v1/transcribe",
                       json={"audio_b64": "!!!not base64!!!", "sample_rate": 16000})
    assert resp.status_code == 400
    assert "error" in resp.json()


def test_undecodable_wav_is_a_400(client):
    garbage = base64.b64encode(b"RIFF not really a wav").decode("ascii")
    resp = client.post("/v1/transcribe",
                       json={"audio_b64": garbage, "sample_rate": 16000})
    assert resp.status_code == 400


def test_unicode_text_survives_the_codec(client):
    sentence = "café naïve — résumé"
    synth = client.post("/v1/synthesize",
                        json={"text": sentence, "description": "v"})
    asr = client.post("/v1/transcribe", json=synth.json())
    assert asr.json()["text"] == sentence
