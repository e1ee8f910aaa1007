"""Command-line entry point: parse flags into a SidecarConfig and serve."""

from __future__ import annotations

import argparse
import logging

from .app import create_app
from .config import DEFAULT_MODELS, ROLES, SidecarConfig


def parse_args(argv=None) -> SidecarConfig:
    parser = argparse.ArgumentParser(
        prog="instructforge-sidecar",
        description="HTTP inference service for the speech-instruction "
                    "pipeline wire protocol.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--device", default="cpu",
                        help="Device for model backends (e.g. cpu, cuda:0).")
    parser.add_argument("--max-concurrent-requests", type=int, default=4)
    parser.add_argument("--embed-dim", type=int, default=256,
                        help="Vector dimension of the builtin hashing embedder.")
    for role in ROLES:
        parser.add_argument(
            f"--{role}-model", default=DEFAULT_MODELS[role],
            help=f"Model identifier for the {role} role; builtin:* for the "
                 f"offline backend, a Hugging Face id otherwise, empty to "
                 f"disable (default: {DEFAULT_MODELS[role]}).")
    args = parser.parse_args(argv)
    return SidecarConfig(
        host=args.host,
        port=args.port,
        models={role: getattr(args, f"{role}_model") for role in ROLES},
        device=args.device,
        max_concurrent_requests=args.max_concurrent_requests,
        embed_dim=args.embed_dim,
    )


def main(argv=None):
    logging.basicConfig(level=logging.INFO)
    config = parse_args(argv)
    import uvicorn
    uvicorn.run(create_app(config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()
