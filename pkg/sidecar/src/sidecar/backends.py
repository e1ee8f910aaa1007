"""Model backends for the four service roles.

"builtin:*" identifiers resolve to deterministic local implementations that
need no model download, so the service is useful offline and in CI:

- builtin:rule      rewriter that spells digit tokens out as words
- builtin:codec     TTS/ASR pair that losslessly codes text bytes as audio
- builtin:hashing   char n-gram hashing sentence embedder

Any other identifier is treated as a Hugging Face model id and loaded
lazily; a load failure disables the role rather than crashing the service.
"""

from __future__ import annotations

import hashlib
import io
import logging
import threading
import wave

import numpy as np

log = logging.getLogger(__name__)


class BackendLoadError(RuntimeError):
    """The backend for a role could not be constructed."""


class BadRequestError(ValueError):
    """The request payload cannot be served (e.g. undecodable audio)."""


# ---------------------------------------------------------------------------
# builtin:rule rewriter

_DIGIT_WORDS = ["zero", "one", "two", "three", "four",
                "five", "six", "seven", "eight", "nine"]


def _spell_token(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    core = token[start:end]
    if not core.isdigit():
        return token
    words = " ".join(_DIGIT_WORDS[int(ch)] for ch in core)
    return f"{token[:start]}{words}{token[end:]}"


class RuleRewriter:
    """Spells every digit-only token out digit by digit."""

    model_id = "builtin:rule"

    def rewrite(self, prompt: str, text: str) -> str:
        return " ".join(_spell_token(t) for t in text.split())


# ---------------------------------------------------------------------------
# builtin:codec speech pair: text bytes <-> PCM samples, lossless

SAMPLE_RATE = 16000
SAMPLES_PER_BYTE = 4


def _wav_bytes(samples_i16: np.ndarray, sample_rate: int) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(samples_i16.astype("<i2").tobytes())
    return buf.getvalue()


def _wav_samples(data: bytes) -> tuple[np.ndarray, int]:
    try:
        with wave.open(io.BytesIO(data), "rb") as wf:
            if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
                raise BadRequestError("expected mono 16-bit PCM WAV")
            rate = wf.getframerate()
            frames = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise BadRequestError(f"unreadable WAV payload: {exc}") from exc
    return np.frombuffer(frames, dtype="<i2"), rate


class CodecSynthesizer:
    """Each UTF-8 byte becomes SAMPLES_PER_BYTE constant-amplitude samples."""

    model_id = "builtin:codec"

    def synthesize(self, text: str, description: str) -> tuple[bytes, int]:
        payload = text.encode("utf-8")
        levels = np.repeat(np.frombuffer(payload, dtype=np.uint8), SAMPLES_PER_BYTE)
        samples = np.rint(levels.astype(np.float64) / 255.0 * 32767.0).astype("<i2")
        return _wav_bytes(samples, SAMPLE_RATE), SAMPLE_RATE


class CodecTranscriber:
    model_id = "builtin:codec"

    def transcribe(self, wav_data: bytes, sample_rate: int) -> str:
        samples, _ = _wav_samples(wav_data)
        if len(samples) % SAMPLES_PER_BYTE:
            samples = samples[:len(samples) - len(samples) % SAMPLES_PER_BYTE]
        if len(samples) == 0:
            return ""
        groups = samples.reshape(-1, SAMPLES_PER_BYTE).astype(np.float64)
        levels = np.rint(groups.mean(axis=1) / 32767.0 * 255.0)
        payload = np.clip(levels, 0, 255).astype(np.uint8).tobytes()
        return payload.decode("utf-8", errors="replace")


# ---------------------------------------------------------------------------
# builtin:hashing embedder

class HashingEmbedder:
    """Char trigram counts hashed into a fixed-dimension vector."""

    model_id = "builtin:hashing"

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        padded = f" {text} "
        vec = np.zeros(self.dim)
        for i in range(max(len(padded) - 2, 1)):
            gram = padded[i:i + 3]
            digest = hashlib.sha256(f"{self.model_id}\x00{gram}".encode("utf-8")).digest()
            vec[int.from_bytes(digest[:4], "big") % self.dim] += 1.0
        return [float(x) for x in vec]


# ---------------------------------------------------------------------------
# Hugging Face backends (optional heavyweight path)

class _Locked:
    """Serializes inference for backends that are not thread-safe."""

    def __init__(self, inner):
        self._inner = inner
        self._lock = threading.Lock()

    def __getattr__(self, name):
        attr = getattr(self._inner, name)
        if not callable(attr):
            return attr

        def call(*args, **kwargs):
            with self._lock:
                return attr(*args, **kwargs)

        return call


class HfRewriter:
    def __init__(self, model_id: str, device: str):
        from transformers import pipeline
        self.model_id = model_id
        self._pipe = pipeline("text-generation", model=model_id, device=device)

    def rewrite(self, prompt: str, text: str) -> str:
        out = self._pipe(f"{prompt}\n\n{text}", max_new_tokens=128,
                         do_sample=False, return_full_text=False)
        return out[0]["generated_text"].strip()


class HfSynthesizer:
    def __init__(self, model_id: str, device: str):
        from transformers import pipeline
        self.model_id = model_id
        self._pipe = pipeline("text-to-speech", model=model_id, device=device)

    def synthesize(self, text: str, description: str) -> tuple[bytes, int]:
        out = self._pipe(text)
        audio = np.asarray(out["audio"]).reshape(-1)
        samples = np.rint(np.clip(audio, -1.0, 1.0) * 32767.0).astype("<i2")
        return _wav_bytes(samples, int(out["sampling_rate"])), int(out["sampling_rate"])


class HfTranscriber:
    def __init__(self, model_id: str, device: str):
        from transformers import pipeline
        self.model_id = model_id
        self._pipe = pipeline("automatic-speech-recognition", model=model_id,
                              device=device)

    def transcribe(self, wav_data: bytes, sample_rate: int) -> str:
        samples, rate = _wav_samples(wav_data)
        audio = samples.astype(np.float32) / 32767.0
        return self._pipe({"raw": audio, "sampling_rate": rate})["text"].strip()


class HfEmbedder:
    def __init__(self, model_id: str, device: str):
        from sentence_transformers import SentenceTransformer
        self.model_id = model_id
        self._model = SentenceTransformer(model_id, device=device)

    def embed(self, text: str) -> list[float]:
        return [float(x) for x in self._model.encode([text])[0]]


_HF_BACKENDS = {
    "rewriter": HfRewriter,
    "synthesizer": HfSynthesizer,
    "transcriber": HfTranscriber,
    "embedder": HfEmbedder,
}


def build_backend(role: str, identifier: str, device: str = "cpu",
                  embed_dim: int = 256):
    """Construct the backend for one role; raises BackendLoadError on failure."""
    if identifier == "builtin:rule" and role == "rewriter":
        return RuleRewriter()
    if identifier == "builtin:codec" and role == "synthesizer":
        return CodecSynthesizer()
    if identifier == "builtin:codec" and role == "transcriber":
        return CodecTranscriber()
    if identifier == "builtin:hashing" and role == "embedder":
        return HashingEmbedder(dim=embed_dim)
    if identifier.startswith("builtin:"):
        raise BackendLoadError(f"{identifier!r} is not a builtin for role {role!r}")
    try:
        return _Locked(_HF_BACKENDS[role](identifier, device))
    except BaseException as exc:  # model load failures disable the role
        raise BackendLoadError(f"{role} model {identifier!r} failed to load: {exc}") from exc
