"""In-process HTTP server exposing mock providers over the wire protocol.

Used to exercise the HTTP client end to end and as one side of the
protocol-conformance fixture suite. Roles can be disabled to test 501.
"""

from __future__ import annotations

import base64
import io
import json
import threading
import wave
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .base import ProviderSpec, write_wav
from .mocks import HashingEmbedder, expand_numbers


class MockProtocolServer:
    """Deterministic reference implementation of the four endpoints.

    rewrite: rule-based number expansion
    synthesize: byte-codec audio (text bytes amplitude-coded into PCM)
    transcribe: decodes byte-codec audio back to text
    embed: hashed character n-grams, dimension 64
    """

    SAMPLE_RATE = 16000
    SAMPLES_PER_BYTE = 4

    def __init__(self, roles=("rewriter", "synthesizer", "transcriber", "embedder"),
                 host: str = "127.0.0.1", port: int = 0):
        self.roles = set(roles)
        self._embedder = HashingEmbedder(
            ProviderSpec(role="embedder", name="mock-embed", kind="mock"), dim=64)
        handler = self._make_handler()
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    # -- endpoint logic -----------------------------------------------------

    def encode_audio(self, text: str) -> tuple[bytes, int]:
        data = text.encode("utf-8")
        # each byte becomes a short run of samples at amplitude byte/255
        amplitudes = np.repeat(np.frombuffer(data, dtype=np.uint8).astype(float) / 255.0,
                               self.SAMPLES_PER_BYTE)
        buf = io.BytesIO()
        pcm = (np.clip(amplitudes, 0, 1) * 32767.0).astype("<i2").tobytes()
        with wave.open(buf, "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(self.SAMPLE_RATE)
            wf.writeframes(pcm)
        return buf.getvalue(), self.SAMPLE_RATE

    def decode_audio(self, raw: bytes) -> str:
        with wave.open(io.BytesIO(raw), "rb") as wf:
            data = wf.readframes(wf.getnframes())
        samples = np.frombuffer(data, dtype="<i2").astype(float) / 32767.0
        if len(samples) % self.SAMPLES_PER_BYTE:
            samples = samples[:len(samples) - len(samples) % self.SAMPLES_PER_BYTE]
        per_byte = samples.reshape(-1, self.SAMPLES_PER_BYTE).mean(axis=1)
        decoded = np.rint(per_byte * 255.0).astype(np.uint8).tobytes()
        try:
            return decoded.decode("utf-8")
        except UnicodeDecodeError:
            return ""

    def handle(self, path: str, body: dict) -> tuple[int, dict]:
        role_for_path = {"/v1/rewrite": "rewriter", "/v1/synthesize": "synthesizer",
                         "/v1/transcribe": "transcriber", "/v1/embed": "embedder"}
        role = role_for_path.get(path)
        if role is None:
            return 404, {"error": f"unknown endpoint {path}"}
        if role not in self.roles:
            return 501, {"error": f"role {role} is not configured"}
        try:
            if path == "/v1/rewrite":
                return 200, {"text": expand_numbers(str(body["text"]))}
            if path == "/v1/synthesize":
                text = str(body["text"])
                str(body["description"])
                if not text:
                    return 400, {"error": "empty text"}
                raw, rate = self.encode_audio(text)
                return 200, {"audio_b64": base64.b64encode(raw).decode("ascii"),
                             "sample_rate": rate}
            if path == "/v1/transcribe":
                raw = base64.b64decode(body["audio_b64"])
                return 200, {"text": self.decode_audio(raw)}
            if path == "/v1/embed":
                vec = self._embedder.embed(str(body["text"]))
                return 200, {"values": [float(x) for x in vec], "model": "mock-embed"}
        except (KeyError, TypeError, ValueError, EOFError, wave.Error) as exc:
            return 400, {"error": str(exc)}
        return 404, {"error": "unreachable"}

    def healthz(self) -> dict:
        return {"roles": sorted(self.roles)}

    # -- plumbing -----------------------------------------------------------

    def _make_handler(server_self):
        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def _send(self, status: int, obj: dict):
                payload = json.dumps(obj).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json; charset=utf-8")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                if self.path == "/healthz":
                    self._send(200, server_self.healthz())
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                try:
                    body = json.loads(raw)
                    if not isinstance(body, dict):
                        raise ValueError("body must be a JSON object")
                except (json.JSONDecodeError, ValueError) as exc:
                    self._send(400, {"error": f"malformed body: {exc}"})
                    return
                status, obj = server_self.handle(self.path, body)
                self._send(status, obj)

        return Handler
