"""HTTP providers speaking the inference wire protocol.

Endpoints (JSON over HTTP, UTF-8):
  POST /v1/rewrite    {"prompt", "text"}                -> {"text"}
  POST /v1/synthesize {"text", "description"}           -> {"audio_b64", "sample_rate"}
  POST /v1/transcribe {"audio_b64", "sample_rate"}      -> {"text"}
  POST /v1/embed      {"text"}                          -> {"values", "model"}

Audio travels as little-endian 16-bit PCM WAV, base64. Servers answer
400 on malformed bodies and 503 on model failure. Retries use
exponential backoff capped so total wall time stays within
(max_retries + 1) * timeout.
"""

from __future__ import annotations

import base64
import logging
import time
from pathlib import Path

import numpy as np
import requests

from .base import (Embedder, ProviderError, ProviderSpec, Rewriter,
                   Synthesizer, Transcriber, load_rewrite_prompt)

log = logging.getLogger(__name__)

_BACKOFF_BASE = 0.25


class _HttpCaller:
    def __init__(self, spec: ProviderSpec, session: requests.Session | None = None):
        self.spec = spec
        self.session = session or requests.Session()

    def post(self, path: str, payload: dict) -> dict:
        url = self.spec.endpoint.rstrip("/") + path
        last_error = None
        for attempt in range(self.spec.max_retries + 1):
            if attempt:
                delay = min(_BACKOFF_BASE * 2 ** (attempt - 1), self.spec.timeout)
                time.sleep(delay)
            try:
                resp = self.session.post(url, json=payload, timeout=self.spec.timeout)
                if resp.status_code == 200:
                    return resp.json()
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code in (400, 501):
                    break  # not retryable: the request itself is wrong
            except requests.RequestException as exc:
                last_error = str(exc)
            log.warning("provider %s attempt %d/%d failed: %s", self.spec.name,
                        attempt + 1, self.spec.max_retries + 1, last_error)
        raise ProviderError(f"provider {self.spec.name} unavailable: {last_error}")


class HttpRewriter(Rewriter):
    def __init__(self, spec: ProviderSpec, prompt: str | None = None,
                 session: requests.Session | None = None):
        super().__init__(spec)
        self.prompt = prompt if prompt is not None else load_rewrite_prompt()
        self._caller = _HttpCaller(spec, session)

    def _rewrite(self, original_text: str) -> str:
        resp = self._caller.post("/v1/rewrite",
                                 {"prompt": self.prompt, "text": original_text})
        return str(resp.get("text", ""))


class HttpSynthesizer(Synthesizer):
    def __init__(self, spec: ProviderSpec, cache_dir,
                 session: requests.Session | None = None):
        super().__init__(spec, cache_dir)
        self._caller = _HttpCaller(spec, session)

    def _synthesize(self, text: str, speaker_description: str):
        import io
        import wave

        resp = self._caller.post("/v1/synthesize",
                                 {"text": text, "description": speaker_description})
        raw = base64.b64decode(resp["audio_b64"])
        with wave.open(io.BytesIO(raw), "rb") as wf:
            rate = wf.getframerate()
            data = wf.readframes(wf.getnframes())
        samples = np.frombuffer(data, dtype="<i2").astype(float) / 32767.0
        return samples, int(resp.get("sample_rate", rate))


class HttpTranscriber(Transcriber):
    def __init__(self, spec: ProviderSpec, session: requests.Session | None = None):
        super().__init__(spec)
        self._caller = _HttpCaller(spec, session)

    def _transcribe(self, artifact) -> str:
        raw = Path(artifact.audio_path).read_bytes()
        resp = self._caller.post("/v1/transcribe", {
            "audio_b64": base64.b64encode(raw).decode("ascii"),
            "sample_rate": artifact.sample_rate,
        })
        return str(resp.get("text", ""))


class HttpEmbedder(Embedder):
    def __init__(self, spec: ProviderSpec, cache_dir=None,
                 session: requests.Session | None = None):
        super().__init__(spec, cache_dir)
        self._caller = _HttpCaller(spec, session)
        self._dimension = None

    @property
    def dimension(self) -> int:
        if self._dimension is None:
            # probe once; the dimension is constant per model
            self._dimension = len(self._embed("dimension probe"))
        return self._dimension

    def _embed(self, text: str) -> np.ndarray:
        resp = self._caller.post("/v1/embed", {"text": text})
        vec = np.array(resp["values"], dtype=float)
        self._dimension = len(vec)
        return vec
