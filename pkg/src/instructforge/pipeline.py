"""Batch orchestration: candidates -> speech -> transcripts -> similarity ->
quality -> selection, with a resumable JSONL manifest and bounded parallelism.

Record results are written as they complete (resume safety) and the manifest
is compacted into corpus order at the end of the batch, so serial and
parallel runs over the same seeded mock corpus produce identical files.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import textmetrics
from .config import PipelineConfig
from .providers import ProviderError, build_provider
from .records import (CandidateScore, CandidateText, InstructionRecord,
                      QualityReport, RecordEnvelope, SOURCE_ORIGINAL, Transcript,
                      assign_speakers, envelope_to_line, load_corpus,
                      load_speaker_catalog, read_manifest, rewriter_source,
                      write_manifest)

log = logging.getLogger(__name__)


class EmptyReportError(ValueError):
    """Report requested over a manifest with no scored records."""


@dataclass
class BatchState:
    config_hash: str = ""
    loaded: int = 0
    resumed: int = 0
    scored: int = 0
    failed: int = 0
    elapsed_seconds: float = 0.0
    sim: float | None = None
    pass_rate: float | None = None

    def to_json_obj(self) -> dict:
        return {
            "config_hash": self.config_hash, "loaded": self.loaded,
            "resumed": self.resumed, "scored": self.scored, "failed": self.failed,
            "elapsed_seconds": self.elapsed_seconds,
            "sim": self.sim, "pass_rate": self.pass_rate,
        }


def make_source_rank(config: PipelineConfig):
    """Tie-break order: original, then rewriters in config order, then fusion."""
    order = {SOURCE_ORIGINAL: 0}
    for i, spec in enumerate(config.rewriter_specs, start=1):
        order[rewriter_source(spec.name)] = i
    fusion_rank = len(order)

    def rank(source: str) -> int:
        return order.get(source, fusion_rank + 1)

    return rank


def dedupe_candidates(candidates, policy) -> list[CandidateText]:
    """Collapse candidates equal after normalization; earliest source wins."""
    seen = {}
    for cand in candidates:
        key = " ".join(textmetrics.normalize(cand.text, policy))
        if key not in seen:
            seen[key] = cand
    return list(seen.values())


def build_candidates(record: InstructionRecord, rewriters,
                     policy=textmetrics.DEFAULT_POLICY) -> tuple[list[CandidateText], list[str]]:
    """Original plus one candidate per rewriter, deduplicated original-first.

    A failing rewriter degrades to a warning; the candidate set is never empty.
    """
    warnings = []
    candidates = [CandidateText(record_id=record.id, source=SOURCE_ORIGINAL,
                                text=record.original_text)]
    for rewriter in rewriters:
        try:
            text = rewriter.rewrite(record.original_text)
        except ProviderError as exc:
            warnings.append(f"rewriter {rewriter.spec.name} failed: {exc}")
            continue
        candidates.append(CandidateText(record_id=record.id,
                                        source=rewriter_source(rewriter.spec.name),
                                        text=text))
    return dedupe_candidates(candidates, policy), warnings


def _score_candidate(original_embeds, candidate, speaker_description,
                     synthesizer, transcribers, embedders, warnings):
    """Synthesize, transcribe, embed, and score one candidate.

    Provider failures degrade the candidate to q = 0 rather than aborting.
    Returns (score, artifact_or_None, transcripts).
    """
    try:
        artifact = synthesizer.synthesize(candidate.text, speaker_description)
    except ProviderError as exc:
        warnings.append(f"synthesis failed for {candidate.source}: {exc}")
        score = CandidateScore(candidate_ref=candidate.source, sim_matrix=(),
                               per_transcript_F=(), q=0.0, argmax_transcript=0)
        return score, None, []

    transcripts = []
    for transcriber in transcribers:
        try:
            text = transcriber.transcribe(artifact)
            transcripts.append(Transcript(speech_ref=artifact.synthesis_key,
                                          transcriber=transcriber.spec.name, text=text))
        except ProviderError as exc:
            warnings.append(f"transcriber {transcriber.spec.name} failed "
                            f"for {candidate.source}: {exc}")
            transcripts.append(Transcript(speech_ref=artifact.synthesis_key,
                                          transcriber=transcriber.spec.name,
                                          text="", failed=True))

    matrix = []
    f_values = []
    for transcript in transcripts:
        if not transcript.text.strip():
            # empty ASR output means total information loss: F := 0
            matrix.append(tuple(0.0 for _ in embedders))
            f_values.append(0.0)
            continue
        row = []
        for embedder in embedders:
            vec = embedder.embed(transcript.text)
            row.append(textmetrics.cosine(original_embeds[embedder.name], vec))
        matrix.append(tuple(row))
        f_values.append(float(sum(row) / len(row)))

    q, argmax = textmetrics.quality_q(f_values) if f_values else (0.0, 0)
    score = CandidateScore(candidate_ref=candidate.source,
                           sim_matrix=tuple(matrix),
                           per_transcript_F=tuple(f_values),
                           q=q, argmax_transcript=argmax)
    return score, artifact, transcripts


def score_record(record: InstructionRecord, candidates, speaker_description: str,
                 synthesizer, transcribers, embedders, alpha: float,
                 source_rank) -> RecordEnvelope:
    """Produce a scored envelope for one record; always returns a report."""
    warnings = []
    original_embeds = {e.name: e.embed(record.original_text) for e in embedders}

    scores = []
    speeches = {}
    transcripts = {}
    for candidate in candidates:
        score, artifact, cand_transcripts = _score_candidate(
            original_embeds, candidate, speaker_description,
            synthesizer, transcribers, embedders, warnings)
        scores.append(score)
        if artifact is not None:
            speeches[candidate.source] = artifact
            transcripts[candidate.source] = cand_transcripts

    best = textmetrics.select_best(
        [c.source for c in candidates], [s.q for s in scores], source_rank)
    selected = candidates[best]
    report = QualityReport(
        record_id=record.id,
        per_candidate=tuple(scores),
        selected_candidate=selected.source,
        selected_speech=speeches[selected.source].synthesis_key
        if selected.source in speeches else "",
        selected_transcript=scores[best].argmax_transcript,
        passes_alpha=scores[best].q > alpha,
    )
    return RecordEnvelope(stage="scored", record=record, candidates=list(candidates),
                          speeches=speeches, transcripts=transcripts,
                          report=report, warnings=warnings)


class PipelineRunner:
    """Holds constructed providers for a config; reusable across records."""

    def __init__(self, config: PipelineConfig):
        self.config = config.validated_for_scoring()
        cache = config.cache_dir
        self.rewriters = [build_provider(s, cache) for s in config.rewriter_specs]
        self.synthesizer = build_provider(config.synthesizer_spec, cache)
        self.transcribers = [build_provider(s, cache) for s in config.transcriber_specs]
        self.embedders = [build_provider(s, cache) for s in config.embedder_specs]
        self.source_rank = make_source_rank(config)

    def speaker_description(self, record: InstructionRecord, catalog_by_id) -> str:
        profile = catalog_by_id.get(record.speaker_id)
        return profile.description if profile else ""

    def process_record(self, record: InstructionRecord, speaker_description: str) -> RecordEnvelope:
        candidates, warnings = build_candidates(
            record, self.rewriters, self.config.normalization_policy)
        envelope = score_record(record, candidates, speaker_description,
                                self.synthesizer, self.transcribers, self.embedders,
                                self.config.alpha, self.source_rank)
        envelope.warnings = warnings + envelope.warnings
        return envelope


def _meta_path(manifest_path) -> Path:
    p = Path(manifest_path)
    return p.with_name(p.name + ".meta.json")


def run_batch(corpus_path, config: PipelineConfig, dataset_tag: str = "default",
              records=None) -> tuple[str, BatchState]:
    """Process a corpus through scoring with bounded record-level parallelism.

    Re-running with an unchanged config hash skips records that already
    reached the scored stage. Individual record failures are logged and
    counted, never batch-fatal.
    """
    start = time.monotonic()
    runner = PipelineRunner(config)
    state = BatchState(config_hash=config.config_hash())

    if records is None:
        records = load_corpus(corpus_path, dataset_tag)
    catalog = load_speaker_catalog(config.speaker_catalog_path)
    records = assign_speakers(records, catalog, config.rng_seed)
    catalog_by_id = {p.id: p for p in catalog}
    state.loaded = len(records)

    manifest_path = Path(config.manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    done: dict[str, RecordEnvelope] = {}
    meta = _meta_path(manifest_path)
    if manifest_path.exists() and meta.exists():
        try:
            stored = json.loads(meta.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            stored = {}
        if stored.get("config_hash") == state.config_hash:
            for env in read_manifest(manifest_path):
                if env.stage == "scored":
                    done[env.record.id] = env
            state.resumed = len(done)
        else:
            log.info("config changed; ignoring previous manifest %s", manifest_path)

    pending = [r for r in records if r.id not in done]
    write_lock = threading.Lock()

    def work(record: InstructionRecord) -> RecordEnvelope:
        return runner.process_record(record, runner.speaker_description(record, catalog_by_id))

    with manifest_path.open("a" if done else "w", encoding="utf-8") as fh:
        def finish(env: RecordEnvelope):
            with write_lock:
                fh.write(envelope_to_line(env) + "\n")
                fh.flush()
                done[env.record.id] = env

        if config.max_parallel_requests == 1:
            for record in pending:
                try:
                    finish(work(record))
                    state.scored += 1
                except Exception:
                    log.exception("record %s failed", record.id)
                    state.failed += 1
        else:
            with ThreadPoolExecutor(max_workers=config.max_parallel_requests) as pool:
                futures = {pool.submit(work, r): r for r in pending}
                for future, record in futures.items():
                    try:
                        finish(future.result())
                        state.scored += 1
                    except Exception:
                        log.exception("record %s failed", record.id)
                        state.failed += 1

    # compact into canonical corpus order so parallel runs are byte-identical
    ordered = [done[r.id] for r in records if r.id in done]
    write_manifest(manifest_path, ordered)
    meta.write_text(json.dumps({"config_hash": state.config_hash}), encoding="utf-8")

    q_values = [env.report.per_candidate[_selected_index(env)].q
                for env in ordered if env.report]
    if q_values:
        state.sim = textmetrics.sim_aggregate(q_values)
        state.pass_rate = textmetrics.pass_rate(q_values, config.alpha)
    state.elapsed_seconds = time.monotonic() - start
    return str(manifest_path), state


def _selected_index(env: RecordEnvelope) -> int:
    for i, score in enumerate(env.report.per_candidate):
        if score.candidate_ref == env.report.selected_candidate:
            return i
    raise ValueError(f"manifest record {env.record.id}: selected candidate missing")


def selected_score(env: RecordEnvelope) -> CandidateScore:
    return env.report.per_candidate[_selected_index(env)]


def selected_transcript_text(env: RecordEnvelope) -> str:
    source = env.report.selected_candidate
    transcripts = env.transcripts.get(source, [])
    idx = env.report.selected_transcript
    return transcripts[idx].text if idx < len(transcripts) else ""


def rescore_manifest(manifest_path, alpha: float, source_rank) -> dict:
    """Recompute q, selection, and pass flags from the persisted similarity
    matrices (no provider calls); useful after changing alpha."""
    envelopes = read_manifest(manifest_path)
    rescored = 0
    from dataclasses import replace as _replace
    for env in envelopes:
        if env.report is None:
            continue
        new_scores = []
        for score in env.report.per_candidate:
            f_values = [float(sum(row) / len(row)) if row else 0.0
                        for row in score.sim_matrix]
            if f_values:
                q, argmax = textmetrics.quality_q(f_values)
            else:
                q, argmax = 0.0, 0
            new_scores.append(_replace(score, per_transcript_F=tuple(f_values),
                                       q=q, argmax_transcript=argmax))
        best = textmetrics.select_best([s.candidate_ref for s in new_scores],
                                       [s.q for s in new_scores], source_rank)
        selected = new_scores[best]
        speech = env.speeches.get(selected.candidate_ref)
        env.report = QualityReport(
            record_id=env.record.id,
            per_candidate=tuple(new_scores),
            selected_candidate=selected.candidate_ref,
            selected_speech=speech.synthesis_key if speech else "",
            selected_transcript=selected.argmax_transcript,
            passes_alpha=selected.q > alpha,
        )
        rescored += 1
    write_manifest(manifest_path, envelopes)
    q_values = [selected_score(e).q for e in envelopes if e.report]
    return {"rescored": rescored,
            "sim": textmetrics.sim_aggregate(q_values) if q_values else None,
            "pass_rate": textmetrics.pass_rate(q_values, alpha) if q_values else None}


def report(manifest_path, alpha: float = 0.9,
           policy=textmetrics.DEFAULT_POLICY) -> dict:
    """Per-dataset SIM / Pass / WER table plus an unweighted Average row."""
    envelopes = [e for e in read_manifest(manifest_path) if e.report]
    if not envelopes:
        raise EmptyReportError(f"{manifest_path}: no scored records")

    by_dataset: dict[str, list[RecordEnvelope]] = {}
    for env in envelopes:
        by_dataset.setdefault(env.record.dataset, []).append(env)

    rows = []
    for dataset in sorted(by_dataset):
        group = by_dataset[dataset]
        q_values = [selected_score(e).q for e in group]
        wers = [textmetrics.wer(e.record.original_text, selected_transcript_text(e), policy)
                for e in group]
        rows.append({
            "dataset": dataset,
            "n": len(group),
            "sim": textmetrics.sim_aggregate(q_values),
            "pass": round(textmetrics.pass_rate(q_values, alpha), 4),
            "wer": round(float(sum(wers) / len(wers)), 4),
        })
    if len(rows) > 1:
        rows.append({
            "dataset": "Average",
            "n": sum(r["n"] for r in rows),
            "sim": round(sum(r["sim"] for r in rows) / len(rows), 2),
            "pass": round(sum(r["pass"] for r in rows) / len(rows), 4),
            "wer": round(sum(r["wer"] for r in rows) / len(rows), 4),
        })

    selected_sources: dict[str, int] = {}
    for env in envelopes:
        src = env.report.selected_candidate
        selected_sources[src] = selected_sources.get(src, 0) + 1

    return {"alpha": alpha, "rows": rows, "selected_sources": selected_sources}


def format_report_table(rep: dict) -> str:
    header = f"{'Dataset':<16}{'N':>6}{'SIM':>10}{'Pass':>10}{'WER':>10}"
    lines = [header, "-" * len(header)]
    for row in rep["rows"]:
        lines.append(f"{row['dataset']:<16}{row['n']:>6}{row['sim']:>10.2f}"
                     f"{row['pass']:>10.4f}{row['wer']:>10.4f}")
    return "\n".join(lines)


def consistency(manifest_path, policy=textmetrics.DEFAULT_POLICY) -> float:
    """SIM-WER consistency over the original candidate's transcripts."""
    envelopes = [e for e in read_manifest(manifest_path) if e.report]
    if not envelopes:
        raise EmptyReportError(f"{manifest_path}: no scored records")
    pairs = []
    for env in envelopes:
        transcripts = env.transcripts.get(SOURCE_ORIGINAL)
        if not transcripts:
            continue
        score = next((s for s in env.report.per_candidate
                      if s.candidate_ref == SOURCE_ORIGINAL), None)
        if score is None:
            continue
        wers = [textmetrics.wer(env.record.original_text, t.text, policy)
                for t in transcripts]
        pairs.append((list(score.per_transcript_F), wers))
    return textmetrics.sim_wer_consistency(pairs)
