"""Domain types, corpus loading, speaker assignment, and the manifest schema.

All types are frozen dataclasses: value objects that are safe to share
across worker threads. Manifest persistence is JSONL, one envelope per
record, so a batch can resume mid-corpus.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, asdict, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

log = logging.getLogger(__name__)

STAGES = ("loaded", "candidates", "synthesized", "transcribed", "scored", "exported")

SOURCE_ORIGINAL = "original"
SOURCE_FUSION = "fusion"


class CorpusError(ValueError):
    """Malformed corpus or manifest input."""


class ConfigurationError(ValueError):
    """Invalid pipeline configuration."""


@dataclass(frozen=True)
class InstructionRecord:
    id: str
    dataset: str
    original_text: str
    context_document: Optional[str] = None
    reference_response: Optional[str] = None
    speaker_id: Optional[str] = None

    def __post_init__(self):
        if not self.original_text.strip():
            raise CorpusError(f"record {self.id!r}: original_text is empty")


@dataclass(frozen=True)
class SpeakerProfile:
    id: str
    name: str
    description: str

    def __post_init__(self):
        if not self.description.strip():
            raise ConfigurationError(f"speaker {self.id!r}: empty description")


@dataclass(frozen=True)
class CandidateText:
    record_id: str
    source: str  # "original", "rewriter:<name>", or "fusion"
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"candidate for {self.record_id!r}: empty text")

    @property
    def is_original(self) -> bool:
        return self.source == SOURCE_ORIGINAL

    @property
    def is_fusion(self) -> bool:
        return self.source == SOURCE_FUSION


def rewriter_source(name: str) -> str:
    return f"rewriter:{name}"


@dataclass(frozen=True)
class SpeechArtifact:
    candidate_ref: str  # candidate source tag within the record
    audio_path: str
    sample_rate: int
    duration: float
    synthesis_key: str

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be >= 0")


@dataclass(frozen=True)
class Transcript:
    speech_ref: str
    transcriber: str
    text: str
    failed: bool = False


@dataclass(frozen=True)
class CandidateScore:
    candidate_ref: str
    sim_matrix: tuple  # rows: transcripts, cols: embedders, cosine values
    per_transcript_F: tuple
    q: float
    argmax_transcript: int


@dataclass(frozen=True)
class QualityReport:
    record_id: str
    per_candidate: tuple  # of CandidateScore
    selected_candidate: str
    selected_speech: str
    selected_transcript: int
    passes_alpha: bool


@dataclass(frozen=True)
class FusionPair:
    record_id: str
    original_text: str
    rewritten_text: str
    q_original: float
    q_rewritten: float
    kind: str  # "success" | "failure"


def load_corpus(path, dataset_tag: str) -> list[InstructionRecord]:
    """Read a JSONL corpus of {id?, question, context?, answer?} objects.

    Missing ids are synthesized as "{dataset_tag}-{line_number}" (1-based).
    Empty questions are skipped with a warning, malformed JSON is fatal.
    """
    records = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: malformed JSON at line {lineno}: {exc}") from exc
            question = (obj.get("question") or "").strip()
            if not question:
                skipped += 1
                log.warning("%s line %d: empty question, skipped", path, lineno)
                continue
            records.append(InstructionRecord(
                id=str(obj.get("id") or f"{dataset_tag}-{lineno}"),
                dataset=dataset_tag,
                original_text=question,
                context_document=obj.get("context"),
                reference_response=obj.get("answer"),
            ))
    seen = set()
    for rec in records:
        if rec.id in seen:
            raise CorpusError(f"{path}: duplicate record id {rec.id!r}")
        seen.add(rec.id)
    if skipped:
        log.warning("%s: skipped %d records with empty questions", path, skipped)
    return records


def load_speaker_catalog(path=None) -> list[SpeakerProfile]:
    """Load the speaker catalog JSONL; defaults to the shipped 192-entry asset."""
    if path is None:
        text = resources.files("instructforge.assets").joinpath("speakers.jsonl").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    catalog = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        catalog.append(SpeakerProfile(id=obj["id"], name=obj["name"], description=obj["description"]))
    return catalog


def _speaker_index(seed: int, record_id: str, catalog_size: int) -> int:
    digest = hashlib.sha256(f"{seed}:{record_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % catalog_size


def assign_speakers(records: Iterable[InstructionRecord],
                    catalog: list[SpeakerProfile],
                    seed: int) -> list[InstructionRecord]:
    """Assign each record a speaker, uniform over the catalog.

    Pure function of (seed, record id, catalog): the same inputs always
    produce the same assignment, independent of record order.
    """
    if not catalog:
        raise ConfigurationError("speaker catalog is empty")
    return [replace(rec, speaker_id=catalog[_speaker_index(seed, rec.id, len(catalog))].id)
            for rec in records]


# ---------------------------------------------------------------------------
# Manifest persistence

@dataclass
class RecordEnvelope:
    """One manifest line: a record plus everything derived from it so far."""
    stage: str
    record: InstructionRecord
    candidates: list = field(default_factory=list)      # CandidateText
    speeches: dict = field(default_factory=dict)        # candidate source -> SpeechArtifact
    transcripts: dict = field(default_factory=dict)     # candidate source -> [Transcript]
    report: Optional[QualityReport] = None
    warnings: list = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "stage": self.stage,
            "record": asdict(self.record),
            "candidates": [asdict(c) for c in self.candidates],
            "speeches": {k: asdict(v) for k, v in self.speeches.items()},
            "transcripts": {k: [asdict(t) for t in ts] for k, ts in self.transcripts.items()},
            "report": _report_to_obj(self.report) if self.report else None,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RecordEnvelope":
        return cls(
            stage=obj["stage"],
            record=InstructionRecord(**obj["record"]),
            candidates=[CandidateText(**c) for c in obj["candidates"]],
            speeches={k: SpeechArtifact(**v) for k, v in obj.get("speeches", {}).items()},
            transcripts={k: [Transcript(**t) for t in ts]
                         for k, ts in obj.get("transcripts", {}).items()},
            report=_report_from_obj(obj["report"]) if obj.get("report") else None,
            warnings=list(obj.get("warnings", [])),
        )


def _report_to_obj(report: QualityReport) -> dict:
    obj = asdict(report)
    obj["per_candidate"] = [asdict(c) for c in report.per_candidate]
    return obj


def _report_from_obj(obj: dict) -> QualityReport:
    per_candidate = tuple(
        CandidateScore(
            candidate_ref=c["candidate_ref"],
            sim_matrix=tuple(tuple(row) for row in c["sim_matrix"]),
            per_transcript_F=tuple(c["per_transcript_F"]),
            q=c["q"],
            argmax_transcript=c["argmax_transcript"],
        )
        for c in obj["per_candidate"]
    )
    return QualityReport(
        record_id=obj["record_id"],
        per_candidate=per_candidate,
        selected_candidate=obj["selected_candidate"],
        selected_speech=obj["selected_speech"],
        selected_transcript=obj["selected_transcript"],
        passes_alpha=obj["passes_alpha"],
    )


def envelope_to_line(env: RecordEnvelope) -> str:
    return json.dumps(env.to_json_obj(), ensure_ascii=False, sort_keys=True,
                      separators=(",", ":"))


def write_manifest(path, envelopes: Iterable[RecordEnvelope]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for env in envelopes:
            fh.write(envelope_to_line(env) + "\n")
    tmp.replace(path)


def read_manifest(path) -> list[RecordEnvelope]:
    envelopes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                envelopes.append(RecordEnvelope.from_json_obj(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}: bad manifest line {lineno}: {exc}") from exc
    return envelopes
