"""Reference HTTP inference service for the speech-instruction pipeline
wire protocol: /v1/rewrite, /v1/synthesize, /v1/transcribe, /v1/embed,
plus /healthz."""

__version__ = "0.1.0"
