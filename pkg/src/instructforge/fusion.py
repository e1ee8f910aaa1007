"""Knowledge-fusion loop: partition scored records into successful-rewrite
training pairs and failures, emit the fine-tuning dataset, and re-rewrite
failures with a fused rewriter, keeping the max-q selection per record.

Both partition boundaries are strict: a record whose best rewrite sits at
exactly alpha falls in neither set.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import replace
from pathlib import Path

from . import textmetrics
from .config import PipelineConfig
from .pipeline import score_record, selected_score, make_source_rank, _selected_index
from .providers import build_provider, load_rewrite_prompt
from .records import (CandidateText, FusionPair, RecordEnvelope, SOURCE_FUSION,
                      SOURCE_ORIGINAL, read_manifest, write_manifest,
                      load_speaker_catalog)

log = logging.getLogger(__name__)

# LoRA settings emitted for the external fine-tuning step
TRAINING_CONFIG = {
    "base_model": "Meta-Llama-3-8B-Instruct",
    "lora_r": 8,
    "lora_alpha": 16,
    "learning_rate": 3e-4,
    "scheduler": "cosine",
}


class FusionError(ValueError):
    pass


def _original_q(env: RecordEnvelope) -> float:
    for score in env.report.per_candidate:
        if score.candidate_ref == SOURCE_ORIGINAL:
            return score.q
    raise FusionError(
        f"record {env.record.id}: original candidate q missing from manifest")


def partition(envelopes, alpha: float) -> tuple[list[FusionPair], list[FusionPair]]:
    """Split scored records into success pairs and failures.

    success: best candidate is a rewrite with q > alpha while the original
    scored q < alpha. failure: best candidate scored q < alpha.
    """
    successes = []
    failures = []
    for env in envelopes:
        if env.report is None:
            continue
        q_orig = _original_q(env)
        best = selected_score(env)
        best_text = next(c.text for c in env.candidates
                         if c.source == env.report.selected_candidate)
        pair = dict(record_id=env.record.id, original_text=env.record.original_text,
                    rewritten_text=best_text, q_original=q_orig, q_rewritten=best.q)
        if (best.q > alpha and q_orig < alpha
                and env.report.selected_candidate != SOURCE_ORIGINAL):
            successes.append(FusionPair(kind="success", **pair))
        elif best.q < alpha:
            failures.append(FusionPair(kind="failure", **pair))
    return successes, failures


def emit_fusion_training(success_pairs, out_path, prompt: str | None = None,
                         source_manifest=None) -> dict:
    """Write the {prompt, input, target} JSONL plus a training-config JSON.

    Pairs whose target equals the input carry no learnable signal and are
    dropped with a warning. Returns a summary with the provenance hash.
    """
    if not success_pairs:
        raise FusionError("no success pairs: fusion training dataset would be empty")
    prompt = prompt if prompt is not None else load_rewrite_prompt()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    provenance = ""
    if source_manifest is not None:
        provenance = hashlib.sha256(Path(source_manifest).read_bytes()).hexdigest()

    written = 0
    skipped = 0
    with out_path.open("w", encoding="utf-8") as fh:
        for pair in success_pairs:
            if pair.rewritten_text == pair.original_text:
                skipped += 1
                log.warning("fusion pair %s: target identical to input, dropped",
                            pair.record_id)
                continue
            fh.write(json.dumps({"prompt": prompt, "input": pair.original_text,
                                 "target": pair.rewritten_text},
                                ensure_ascii=False, sort_keys=True) + "\n")
            written += 1
    config_path = out_path.with_name(out_path.stem + ".training-config.json")
    config_path.write_text(json.dumps(TRAINING_CONFIG, indent=2) + "\n", encoding="utf-8")
    return {"path": str(out_path), "training_config": str(config_path),
            "pairs_written": written, "pairs_skipped": skipped,
            "source_manifest_sha256": provenance}


def fusion_pass(manifest_path, fused_rewriter_spec, config: PipelineConfig) -> dict:
    """Re-rewrite every failed record with the fused rewriter and rescore.

    A record's selection only ever moves to the fusion candidate when its q
    is strictly higher, so per-record q (and hence SIM and Pass) never
    regresses.
    """
    config = config.validated_for_scoring()
    envelopes = read_manifest(manifest_path)
    _, failures = partition(envelopes, config.alpha)
    failed_ids = {p.record_id for p in failures}
    if not failed_ids:
        log.info("no failed records; fusion pass is a no-op")
        return {"records_retried": 0, "records_improved": 0,
                "manifest": str(manifest_path)}

    fused = build_provider(fused_rewriter_spec, config.cache_dir)
    synthesizer = build_provider(config.synthesizer_spec, config.cache_dir)
    transcribers = [build_provider(s, config.cache_dir) for s in config.transcriber_specs]
    embedders = [build_provider(s, config.cache_dir) for s in config.embedder_specs]
    source_rank = make_source_rank(config)
    catalog = {p.id: p for p in load_speaker_catalog(config.speaker_catalog_path)}

    retried = 0
    improved = 0
    updated = []
    for env in envelopes:
        if env.record.id not in failed_ids:
            updated.append(env)
            continue
        retried += 1
        try:
            text = fused.rewrite(env.record.original_text)
        except Exception as exc:
            env.warnings.append(f"fused rewriter failed: {exc}")
            updated.append(env)
            continue
        normalized = " ".join(textmetrics.normalize(text, config.normalization_policy))
        existing = {" ".join(textmetrics.normalize(c.text, config.normalization_policy))
                    for c in env.candidates}
        if normalized in existing:
            env.warnings.append("fusion rewrite duplicates an existing candidate")
            updated.append(env)
            continue
        candidate = CandidateText(record_id=env.record.id, source=SOURCE_FUSION, text=text)
        speaker = catalog.get(env.record.speaker_id)
        description = speaker.description if speaker else ""
        fresh = score_record(env.record, [candidate], description, synthesizer,
                             transcribers, embedders, config.alpha, source_rank)
        fusion_score = fresh.report.per_candidate[0]
        previous_best = selected_score(env)
        if fusion_score.q > previous_best.q:
            improved += 1
            merged = replace(
                env.report,
                per_candidate=env.report.per_candidate + (fusion_score,),
                selected_candidate=SOURCE_FUSION,
                selected_speech=fresh.report.selected_speech,
                selected_transcript=fusion_score.argmax_transcript,
                passes_alpha=fusion_score.q > config.alpha,
            )
            env.candidates.append(candidate)
            env.speeches.update(fresh.speeches)
            env.transcripts.update(fresh.transcripts)
            env.report = merged
        else:
            # keep the previous best, but persist the attempt for audit
            env.report = replace(env.report,
                                 per_candidate=env.report.per_candidate + (fusion_score,))
            env.candidates.append(candidate)
            env.speeches.update(fresh.speeches)
            env.transcripts.update(fresh.transcripts)
        env.warnings.extend(fresh.warnings)
        updated.append(env)

    write_manifest(manifest_path, updated)
    return {"records_retried": retried, "records_improved": improved,
            "manifest": str(manifest_path)}
