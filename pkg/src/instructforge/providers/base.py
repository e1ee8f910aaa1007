"""Provider specs, role interfaces, and the content-addressed audio cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import wave
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

ROLES = ("rewriter", "synthesizer", "transcriber", "embedder")


class ProviderError(RuntimeError):
    """Provider failed after retries; carried per-record, never batch-fatal."""


class InvalidInputError(ValueError):
    """Caller violated a provider precondition (empty text, unreadable audio)."""


def load_rewrite_prompt() -> str:
    return resources.files("instructforge.assets").joinpath("rewrite_prompt.txt").read_text("utf-8")


def prompt_version_tag(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class ProviderSpec:
    role: str
    name: str
    kind: str = "mock"  # "mock" | "http"
    endpoint: str = ""
    mock_behavior: dict = field(default_factory=dict)
    timeout: float = 30.0
    max_retries: int = 2
    request_version_tag: str = ""

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidInputError(f"unknown provider role {self.role!r}")
        if self.kind not in ("mock", "http"):
            raise InvalidInputError(f"unknown provider kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise InvalidInputError(f"provider {self.name!r}: http kind requires an endpoint")

    def to_json_obj(self) -> dict:
        return {
            "role": self.role, "name": self.name, "kind": self.kind,
            "endpoint": self.endpoint, "mock_behavior": self.mock_behavior,
            "timeout": self.timeout, "max_retries": self.max_retries,
            "request_version_tag": self.request_version_tag,
        }


def synthesis_key(text: str, speaker_description: str, provider_identity: str) -> str:
    """Deterministic cache key over (text, speaker description, provider)."""
    payload = json.dumps([text, speaker_description, provider_identity],
                         ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Audio helpers (16-bit PCM WAV, mono)

def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Atomic write of mono 16-bit PCM; safe under concurrent same-key writers."""
    pcm = np.clip(samples, -1.0, 1.0)
    data = (pcm * 32767.0).astype("<i2").tobytes()
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".wav.tmp")
    try:
        with os.fdopen(fd, "wb") as raw, wave.open(raw, "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(sample_rate)
            wf.writeframes(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, text: str) -> None:
    """Unique-temp-then-rename write; safe under concurrent same-key writers."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=path.suffix + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_wav(path) -> tuple[np.ndarray, int]:
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
                raise InvalidInputError(f"{path}: expected mono 16-bit PCM")
            rate = wf.getframerate()
            data = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise InvalidInputError(f"{path}: unreadable WAV: {exc}") from exc
    samples = np.frombuffer(data, dtype="<i2").astype(float) / 32767.0
    return samples, rate


# ---------------------------------------------------------------------------
# Rewriter output cleanup

_LABEL_RE = re.compile(r"^\s*(rewritten( text)?|output|result|answer)\s*[:\-]\s*", re.IGNORECASE)


def clean_rewrite(text: str) -> str:
    """Strip chrome LLMs add around a rewrite: labels and wrapping quotes."""
    text = text.strip()
    text = _LABEL_RE.sub("", text)
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'“”":
        text = text[1:-1].strip()
    return text


# ---------------------------------------------------------------------------
# Role interfaces

class Rewriter:
    """One rewrite per call; empty responses fall back to the input text."""

    def __init__(self, spec: ProviderSpec):
        self.spec = spec
        self.calls = 0

    def rewrite(self, original_text: str) -> str:
        self.calls += 1
        rewritten = clean_rewrite(self._rewrite(original_text))
        if not rewritten:
            log.warning("rewriter %s returned empty output, falling back to original",
                        self.spec.name)
            return original_text
        if len(rewritten.split()) > 100:
            log.warning("rewriter %s produced a rewrite longer than 100 words",
                        self.spec.name)
        return rewritten

    def _rewrite(self, original_text: str) -> str:
        raise NotImplementedError


class Synthesizer:
    """Audio synthesis with a content-addressed cache under cache_dir."""

    sample_rate = 16000

    def __init__(self, spec: ProviderSpec, cache_dir):
        self.spec = spec
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.calls = 0      # upstream synthesis calls
        self.requests = 0   # total requests including cache hits

    @property
    def identity(self) -> str:
        return f"{self.spec.name}:{self.spec.request_version_tag}"

    def synthesize(self, text: str, speaker_description: str):
        from ..records import SpeechArtifact

        if not text.strip():
            raise InvalidInputError("synthesize: empty text")
        self.requests += 1
        key = synthesis_key(text, speaker_description, self.identity)
        wav_path = self.cache_dir / f"{key}.wav"
        meta_path = self.cache_dir / f"{key}.json"
        if not (wav_path.exists() and meta_path.exists()):
            self.calls += 1
            samples, rate = self._synthesize(text, speaker_description)
            write_wav(wav_path, samples, rate)
            # ground-truth sidecar lets oracle-style mock transcribers work
            meta = {"sample_rate": rate, "duration": len(samples) / rate}
            _atomic_write_text(wav_path.with_suffix(".txt"), text)
            _atomic_write_text(meta_path, json.dumps(meta))
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        return SpeechArtifact(
            candidate_ref="", audio_path=str(wav_path),
            sample_rate=int(meta["sample_rate"]),
            duration=float(meta["duration"]), synthesis_key=key)

    def _synthesize(self, text: str, speaker_description: str) -> tuple[np.ndarray, int]:
        raise NotImplementedError


class Transcriber:
    def __init__(self, spec: ProviderSpec):
        self.spec = spec
        self.calls = 0

    def transcribe(self, artifact) -> str:
        self.calls += 1
        read_wav(artifact.audio_path)  # validates the audio is decodable
        return self._transcribe(artifact)

    def _transcribe(self, artifact) -> str:
        raise NotImplementedError


class Embedder:
    """Embedding with a disk cache so duplicate reruns never recompute."""

    def __init__(self, spec: ProviderSpec, cache_dir=None):
        self.spec = spec
        self.calls = 0
        self.requests = 0
        self.cache_dir = None
        if cache_dir is not None:
            self.cache_dir = Path(cache_dir) / "embeds" / spec.name
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    @property
    def name(self) -> str:
        return self.spec.name

    def embed(self, text: str) -> np.ndarray:
        self.requests += 1
        if not text.strip():
            # zero-vector sentinel; downstream maps it to F = 0
            return np.zeros(self.dimension)
        if self.cache_dir is not None:
            key = hashlib.sha256(
                f"{self.spec.request_version_tag}:{text}".encode("utf-8")).hexdigest()
            path = self.cache_dir / f"{key}.json"
            if path.exists():
                return np.array(json.loads(path.read_text(encoding="utf-8")))
            vec = self._compute(text)
            _atomic_write_text(path, json.dumps([float(x) for x in vec]))
            return vec
        return self._compute(text)

    def _compute(self, text: str) -> np.ndarray:
        self.calls += 1
        return self._embed(text)

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def _embed(self, text: str) -> np.ndarray:
        raise NotImplementedError
