"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 partial batch failure.
All diagnostics go to stderr; --json prints a machine-readable summary
on stdout. Flags override config-file keys, which override built-in
defaults (alpha=0.9, t=0.9, seed=0). Endpoint URLs may come from
INSTRUCTFORGE_* environment variables.
"""

from __future__ import annotations

import json
import sys

import click

from . import exporter, fusion, pipeline
from .config import load_config, with_seed
from .exporter import CostPlan, DEFAULT_GPU_RATE, DEFAULT_HUMAN_RATE
from .providers import InvalidInputError, ProviderSpec
from .records import ConfigurationError, CorpusError


def _emit(obj: dict, as_json: bool, text: str | None = None):
    if as_json:
        click.echo(json.dumps(obj, default=str))
    elif text is not None:
        click.echo(text)
    else:
        for key, value in obj.items():
            click.echo(f"{key}: {value}")


def _fail(message: str, as_json: bool = False, code: int = 1):
    click.echo(message, err=True)
    if as_json:
        click.echo(json.dumps({"error": message}))
    sys.exit(code)


def _threshold(value: float, unit: str) -> float:
    return value / 100.0 if unit == "percent" else value


@click.group(context_settings={"auto_envvar_prefix": "INSTRUCTFORGE"})
def main():
    """Quality-verified synthetic speech-instruction dataset pipeline."""


config_option = click.option("--config", "config_path", type=click.Path(exists=True),
                             default=None, help="TOML config file.")
json_option = click.option("--json", "as_json", is_flag=True,
                           help="Machine-readable JSON summary on stdout.")
manifest_option = click.option("--manifest", "manifest_path", required=True,
                               type=click.Path(), help="Manifest JSONL path.")


@main.command()
@config_option
@click.option("--corpus", required=True, type=click.Path(exists=True),
              help="Corpus JSONL of {id?, question, context?, answer?}.")
@click.option("--dataset-tag", default="default", help="Dataset tag for the records.")
@click.option("--seed", type=int, default=None, help="RNG seed override.")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None,
              help="Manifest output path override.")
@json_option
def synthesize(config_path, corpus, dataset_tag, seed, manifest_path, as_json):
    """Run the full batch: candidates, speech, transcripts, scoring."""
    try:
        overrides = {"manifest_path": manifest_path} if manifest_path else None
        config = with_seed(load_config(config_path, overrides), seed)
        path, state = pipeline.run_batch(corpus, config, dataset_tag)
    except (ConfigurationError, InvalidInputError, CorpusError, OSError) as exc:
        _fail(f"configuration error: {exc}", as_json)
    summary = {"manifest": path, **state.to_json_obj()}
    _emit(summary, as_json)
    sys.exit(2 if state.failed else 0)


@main.command()
@config_option
@manifest_option
@click.option("--alpha", type=float, default=None, help="Quality threshold override.")
@json_option
def score(config_path, manifest_path, alpha, as_json):
    """Recompute quality and selection from persisted similarity matrices."""
    try:
        config = load_config(config_path)
        effective_alpha = alpha if alpha is not None else config.alpha
        summary = pipeline.rescore_manifest(manifest_path, effective_alpha,
                                            pipeline.make_source_rank(config))
    except (ConfigurationError, CorpusError, OSError) as exc:
        _fail(f"configuration error: {exc}", as_json)
    _emit(summary, as_json)


@main.command()
@manifest_option
@click.option("--alpha", type=float, default=0.9, show_default=True,
              help="Pass threshold.")
@json_option
def report(manifest_path, alpha, as_json):
    """SIM / Pass / WER metrics per dataset tag."""
    try:
        rep = pipeline.report(manifest_path, alpha)
    except (pipeline.EmptyReportError, CorpusError, OSError) as exc:
        _fail(f"report error: {exc}", as_json)
    _emit(rep, as_json, text=pipeline.format_report_table(rep))


@main.command()
@manifest_option
@json_option
def consistency(manifest_path, as_json):
    """Fraction of records where the max-F transcript also has minimal WER."""
    try:
        value = pipeline.consistency(manifest_path)
    except (pipeline.EmptyReportError, CorpusError, ValueError, OSError) as exc:
        _fail(f"consistency error: {exc}", as_json)
    _emit({"consistency": value}, as_json, text=f"{value:.4f}")


@main.command("fuse-extract")
@config_option
@manifest_option
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Fusion training JSONL output path.")
@json_option
def fuse_extract(config_path, manifest_path, out_path, as_json):
    """Partition the manifest and emit the fusion fine-tuning dataset."""
    try:
        config = load_config(config_path)
        from .records import read_manifest
        envelopes = read_manifest(manifest_path)
        successes, failures = fusion.partition(envelopes, config.alpha)
        summary = fusion.emit_fusion_training(successes, out_path,
                                              source_manifest=manifest_path)
        summary["failures"] = len(failures)
    except (fusion.FusionError, ConfigurationError, CorpusError, OSError) as exc:
        _fail(f"fusion error: {exc}", as_json)
    _emit(summary, as_json)


@main.command("fuse-apply")
@config_option
@manifest_option
@click.option("--fused-name", default="fused", show_default=True,
              help="Provider name of the fused rewriter.")
@click.option("--fused-endpoint", default="", help="HTTP endpoint of the fused rewriter.")
@click.option("--fused-mock-behavior", default="",
              help="Mock behavior name (offline fused rewriter).")
@json_option
def fuse_apply(config_path, manifest_path, fused_name, fused_endpoint,
               fused_mock_behavior, as_json):
    """Re-rewrite failed records with the fused rewriter and rescore."""
    try:
        config = load_config(config_path)
        if fused_endpoint:
            spec = ProviderSpec(role="rewriter", name=fused_name, kind="http",
                                endpoint=fused_endpoint)
        else:
            behavior = {"behavior": fused_mock_behavior} if fused_mock_behavior else {}
            spec = ProviderSpec(role="rewriter", name=fused_name, kind="mock",
                                mock_behavior=behavior)
        summary = fusion.fusion_pass(manifest_path, spec, config)
    except (ConfigurationError, InvalidInputError, CorpusError, OSError) as exc:
        _fail(f"fusion error: {exc}", as_json)
    _emit(summary, as_json)


@main.command("filter")
@manifest_option
@click.option("--threshold", type=float, default=0.9, show_default=True,
              help="Export quality threshold t.")
@click.option("--threshold-unit", type=click.Choice(["fraction", "percent"]),
              default="fraction", show_default=True,
              help="Unit of --threshold (0.85 vs 85.00).")
@json_option
def filter_cmd(manifest_path, threshold, threshold_unit, as_json):
    """List record ids passing threshold filtering and per-original dedupe."""
    try:
        from .records import read_manifest
        envelopes = read_manifest(manifest_path)
        selected = exporter.filter_and_dedupe(envelopes, _threshold(threshold, threshold_unit))
    except (CorpusError, OSError) as exc:
        _fail(f"filter error: {exc}", as_json)
    ids = [env.record.id for env in selected]
    _emit({"selected": ids, "count": len(ids)}, as_json, text="\n".join(ids))


@main.command()
@manifest_option
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Export JSONL output path.")
@click.option("--mode", type=click.Choice(["golden", "continue"]),
              default="golden", show_default=True)
@click.option("--threshold", type=float, default=0.9, show_default=True)
@click.option("--threshold-unit", type=click.Choice(["fraction", "percent"]),
              default="fraction", show_default=True)
@click.option("--continuations", "continuations_path", type=click.Path(exists=True),
              default=None, help="JSONL of {id, response} for continue mode.")
@click.option("--bundle", "bundle_dir", type=click.Path(), default=None,
              help="Copy audio into a portable directory tree.")
@json_option
def export(manifest_path, out_path, mode, threshold, threshold_unit,
           continuations_path, bundle_dir, as_json):
    """Export the filtered dataset in the chat-template JSONL schema."""
    if mode == "continue" and not continuations_path:
        _fail("configuration error: continue mode requires --continuations", as_json)
    try:
        summary = exporter.export_records(
            manifest_path, out_path, _threshold(threshold, threshold_unit),
            mode=mode, continuations_path=continuations_path, bundle_dir=bundle_dir)
    except (exporter.ExportError, CorpusError, OSError) as exc:
        _fail(f"export error: {exc}", as_json)
    _emit(summary, as_json)


@main.command()
@click.option("--human-hours", type=float, required=True)
@click.option("--gpu-hours", type=float, required=True)
@click.option("--human-rate", type=str, default=str(DEFAULT_HUMAN_RATE),
              show_default=True, help="USD per human hour.")
@click.option("--gpu-rate", type=str, default=str(DEFAULT_GPU_RATE),
              show_default=True, help="USD per GPU hour per device.")
@json_option
def cost(human_hours, gpu_hours, human_rate, gpu_rate, as_json):
    """Estimate dataset construction cost in USD."""
    from decimal import Decimal, InvalidOperation
    try:
        plan = CostPlan(human_hours=human_hours, gpu_hours=gpu_hours,
                        human_rate=Decimal(human_rate), gpu_rate=Decimal(gpu_rate))
        total = exporter.estimate_cost(plan)
    except (exporter.ExportError, InvalidOperation) as exc:
        _fail(f"cost error: {exc}", as_json)
    _emit({"total": str(total)}, as_json, text=f"{total}")


if __name__ == "__main__":
    main()
