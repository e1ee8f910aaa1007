"""HTTP application implementing the inference wire protocol.

Endpoints (JSON over HTTP):
    POST /v1/rewrite     {prompt, text}              -> {text}
    POST /v1/synthesize  {text, description}         -> {audio_b64, sample_rate}
    POST /v1/transcribe  {audio_b64, sample_rate}    -> {text}
    POST /v1/embed       {text}                      -> {values, model}
    GET  /healthz                                    -> {roles: [...loaded...]}

Malformed or incomplete requests get 400 {"error": ...}; requests to a role
with no loaded model get 501 {"error": ...}.
"""

from __future__ import annotations

import base64
import binascii
import logging
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backends import BackendLoadError, BadRequestError, build_backend
from .config import ROLES, SidecarConfig

log = logging.getLogger(__name__)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _require(body: dict, field: str, kind):
    value = body.get(field)
    if not isinstance(value, kind) or (kind is str and not value):
        raise BadRequestError(f"field {field!r} must be a non-empty {kind.__name__}")
    return value


def load_backends(config: SidecarConfig) -> dict:
    """One backend per configured role; load failures disable the role."""
    backends = {}
    for role in ROLES:
        identifier = config.model_for(role)
        if not identifier:
            log.info("role %s: disabled by configuration", role)
            continue
        try:
            backends[role] = build_backend(role, identifier, config.device,
                                           config.embed_dim)
        except BackendLoadError as exc:
            log.warning("role %s disabled: %s", role, exc)
    return backends


def create_app(config: SidecarConfig | None = None) -> FastAPI:
    config = config or SidecarConfig()
    app = FastAPI(title="instructforge-sidecar")
    backends = load_backends(config)
    gate = threading.BoundedSemaphore(config.max_concurrent_requests)

    async def _body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception as exc:
            raise BadRequestError(f"malformed JSON body: {exc}") from exc
        if not isinstance(body, dict):
            raise BadRequestError("request body must be a JSON object")
        return body

    def _backend(role: str):
        backend = backends.get(role)
        if backend is None:
            raise LookupError(role)
        return backend

    def _handle(role: str, work):
        try:
            backend = _backend(role)
        except LookupError:
            return _error(501, f"no {role} model is loaded")
        try:
            with gate:
                return JSONResponse(work(backend))
        except BadRequestError as exc:
            return _error(400, str(exc))
        except Exception:
            log.exception("%s request failed", role)
            return _error(500, f"{role} backend error")

    @app.post("/v1/rewrite")
    async def rewrite(request: Request):
        try:
            body = await _body(request)
            prompt = _require(body, "prompt", str)
            text = _require(body, "text", str)
        except BadRequestError as exc:
            return _error(400, str(exc))
        return _handle("rewriter", lambda b: {"text": b.rewrite(prompt, text)})

    @app.post("/v1/synthesize")
    async def synthesize(request: Request):
        try:
            body = await _body(request)
            text = _require(body, "text", str)
            description = _require(body, "description", str)
        except BadRequestError as exc:
            return _error(400, str(exc))

        def work(backend):
            wav, rate = backend.synthesize(text, description)
            return {"audio_b64": base64.b64encode(wav).decode("ascii"),
                    "sample_rate": rate}

        return _handle("synthesizer", work)

    @app.post("/v1/transcribe")
    async def transcribe(request: Request):
        try:
            body = await _body(request)
            audio_b64 = _require(body, "audio_b64", str)
            sample_rate = _require(body, "sample_rate", int)
            try:
                wav = base64.b64decode(audio_b64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise BadRequestError(f"audio_b64 is not valid base64: {exc}") from exc
        except BadRequestError as exc:
            return _error(400, str(exc))
        return _handle("transcriber",
                       lambda b: {"text": b.transcribe(wav, sample_rate)})

    @app.post("/v1/embed")
    async def embed(request: Request):
        try:
            body = await _body(request)
            text = _require(body, "text", str)
        except BadRequestError as exc:
            return _error(400, str(exc))
        return _handle("embedder",
                       lambda b: {"values": b.embed(text), "model": b.model_id})

    @app.get("/healthz")
    async def healthz():
        return JSONResponse({"roles": sorted(backends)})

    return app
