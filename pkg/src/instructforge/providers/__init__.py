"""Provider construction: mock or HTTP, per ProviderSpec."""

from __future__ import annotations

from .base import (Embedder, InvalidInputError, ProviderError, ProviderSpec,
                   Rewriter, Synthesizer, Transcriber, clean_rewrite,
                   load_rewrite_prompt, prompt_version_tag, synthesis_key)
from .http_client import HttpEmbedder, HttpRewriter, HttpSynthesizer, HttpTranscriber
from .mocks import build_mock

__all__ = [
    "Embedder", "InvalidInputError", "ProviderError", "ProviderSpec",
    "Rewriter", "Synthesizer", "Transcriber", "build_provider",
    "clean_rewrite", "load_rewrite_prompt", "prompt_version_tag",
    "synthesis_key",
]


def build_provider(spec: ProviderSpec, cache_dir=None):
    if spec.kind == "mock":
        return build_mock(spec, cache_dir)
    if spec.role == "rewriter":
        return HttpRewriter(spec)
    if spec.role == "synthesizer":
        return HttpSynthesizer(spec, cache_dir)
    if spec.role == "transcriber":
        return HttpTranscriber(spec)
    if spec.role == "embedder":
        return HttpEmbedder(spec, cache_dir)
    raise InvalidInputError(f"unknown role {spec.role!r}")
