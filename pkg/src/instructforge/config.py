"""Pipeline configuration: defaults, TOML config files, env and flag overrides."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .providers import ProviderSpec, load_rewrite_prompt, prompt_version_tag
from .records import ConfigurationError
from .textmetrics import NormalizationPolicy

ENV_PREFIX = "INSTRUCTFORGE_"

DEFAULT_ALPHA = 0.9
DEFAULT_THRESHOLD = 0.9
DEFAULT_SEED = 0


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = DEFAULT_ALPHA
    export_threshold_t: float = DEFAULT_THRESHOLD
    rewriter_specs: tuple = ()
    synthesizer_spec: ProviderSpec | None = None
    transcriber_specs: tuple = ()
    embedder_specs: tuple = ()
    rng_seed: int = DEFAULT_SEED
    normalization_policy: NormalizationPolicy = field(default_factory=NormalizationPolicy)
    max_parallel_requests: int = 4
    cache_dir: str = "cache"
    manifest_path: str = "manifest.jsonl"
    speaker_catalog_path: str | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.export_threshold_t <= 1.0:
            raise ConfigurationError(f"threshold t must be in [0, 1], got {self.export_threshold_t}")
        if self.max_parallel_requests < 1:
            raise ConfigurationError("max_parallel_requests must be positive")

    def validated_for_scoring(self) -> "PipelineConfig":
        if self.synthesizer_spec is None:
            raise ConfigurationError("a synthesizer must be configured")
        if not self.transcriber_specs:
            raise ConfigurationError("at least one transcriber must be configured")
        if not self.embedder_specs:
            raise ConfigurationError("at least one embedder must be configured")
        return self

    def config_hash(self) -> str:
        """Resume guard: changing the prompt, providers, alpha, seed, or
        normalization invalidates any previous partial manifest."""
        payload = {
            "alpha": self.alpha,
            "seed": self.rng_seed,
            "prompt": prompt_version_tag(load_rewrite_prompt()),
            "normalization": [self.normalization_policy.lowercase,
                              self.normalization_policy.strip_punctuation,
                              self.normalization_policy.collapse_whitespace],
            "rewriters": [s.to_json_obj() for s in self.rewriter_specs],
            "synthesizer": self.synthesizer_spec.to_json_obj() if self.synthesizer_spec else None,
            "transcribers": [s.to_json_obj() for s in self.transcriber_specs],
            "embedders": [s.to_json_obj() for s in self.embedder_specs],
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _spec_from_obj(role: str, obj: dict) -> ProviderSpec:
    endpoint = obj.get("endpoint", "")
    env_key = f"{ENV_PREFIX}{role.upper()}_{obj.get('name', '').upper().replace('-', '_')}_ENDPOINT"
    endpoint = os.environ.get(env_key, endpoint)
    return ProviderSpec(
        role=role,
        name=obj.get("name", role),
        kind=obj.get("kind", "mock"),
        endpoint=endpoint,
        mock_behavior=obj.get("mock_behavior", {}),
        timeout=float(obj.get("timeout", 30.0)),
        max_retries=int(obj.get("max_retries", 2)),
        request_version_tag=obj.get("request_version_tag",
                                    prompt_version_tag(load_rewrite_prompt())),
    )


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig: defaults <- TOML file <- explicit overrides."""
    data: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}

    norm = data.get("normalization", {})
    policy = NormalizationPolicy(
        lowercase=norm.get("lowercase", True),
        strip_punctuation=norm.get("strip_punctuation", True),
        collapse_whitespace=norm.get("collapse_whitespace", True),
    )
    providers = data.get("providers", {})
    rewriters = tuple(_spec_from_obj("rewriter", o) for o in providers.get("rewriters", []))
    synthesizer = providers.get("synthesizer")
    transcribers = tuple(_spec_from_obj("transcriber", o) for o in providers.get("transcribers", []))
    embedders = tuple(_spec_from_obj("embedder", o) for o in providers.get("embedders", []))

    names_by_role = {}
    for spec in (*rewriters, *transcribers, *embedders):
        names = names_by_role.setdefault(spec.role, set())
        if spec.name in names:
            raise ConfigurationError(f"duplicate {spec.role} name {spec.name!r}")
        names.add(spec.name)

    return PipelineConfig(
        alpha=float(data.get("alpha", DEFAULT_ALPHA)),
        export_threshold_t=float(data.get("export_threshold_t", DEFAULT_THRESHOLD)),
        rewriter_specs=rewriters,
        synthesizer_spec=_spec_from_obj("synthesizer", synthesizer) if synthesizer else None,
        transcriber_specs=transcribers,
        embedder_specs=embedders,
        rng_seed=int(data.get("seed", DEFAULT_SEED)),
        normalization_policy=policy,
        max_parallel_requests=int(data.get("max_parallel_requests", 4)),
        cache_dir=str(data.get("cache_dir", "cache")),
        manifest_path=str(data.get("manifest_path", "manifest.jsonl")),
        speaker_catalog_path=data.get("speaker_catalog_path"),
    )


def with_seed(config: PipelineConfig, seed: int | None) -> PipelineConfig:
    return config if seed is None else replace(config, rng_seed=seed)
