"""Service configuration: bind address, one model identifier per role,
device selection, and the request concurrency bound."""

from __future__ import annotations

from dataclasses import dataclass, field

ROLES = ("rewriter", "synthesizer", "transcriber", "embedder")

# Builtin identifiers resolve to deterministic local backends that need no
# model download; anything else is treated as a Hugging Face model id and
# loaded lazily (load failure disables the role, visible in /healthz).
DEFAULT_MODELS = {
    "rewriter": "builtin:rule",
    "synthesizer": "builtin:codec",
    "transcriber": "builtin:codec",
    "embedder": "builtin:hashing",
}


@dataclass(frozen=True)
class SidecarConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    models: dict = field(default_factory=dict)  # role -> model identifier; "" disables
    device: str = "cpu"
    max_concurrent_requests: int = 4
    embed_dim: int = 256  # dimension of the builtin hashing embedder

    def __post_init__(self):
        for role in self.models:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be positive")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be positive")

    def model_for(self, role: str) -> str:
        if role in self.models:
            return self.models[role]
        return DEFAULT_MODELS[role]

    def enabled_roles(self) -> list[str]:
        return [r for r in ROLES if self.model_for(r)]
