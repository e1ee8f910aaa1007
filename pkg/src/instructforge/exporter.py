"""Dataset finalization: threshold filtering, per-original-text dedupe,
chat-template export for fine-tuning, and the cost estimator."""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from importlib import resources
from pathlib import Path

from .pipeline import selected_score
from .records import RecordEnvelope, read_manifest

log = logging.getLogger(__name__)

MODE_GOLDEN = "golden"
MODE_CONTINUE = "continue"

# USD/hour defaults: minimum-wage labor and the cheapest single-GPU cloud rate
DEFAULT_HUMAN_RATE = Decimal("7.50")
DEFAULT_GPU_RATE = Decimal("0.42")


class ExportError(ValueError):
    pass


@dataclass(frozen=True)
class CostPlan:
    human_hours: float
    gpu_hours: float
    human_rate: Decimal = DEFAULT_HUMAN_RATE
    gpu_rate: Decimal = DEFAULT_GPU_RATE

    def __post_init__(self):
        if (self.human_hours < 0 or self.gpu_hours < 0
                or self.human_rate < 0 or self.gpu_rate < 0):
            raise ExportError("cost plan values must be non-negative")


def estimate_cost(plan: CostPlan) -> Decimal:
    """human_hours * human_rate + gpu_hours * gpu_rate, rounded to cents."""
    total = (Decimal(str(plan.human_hours)) * plan.human_rate
             + Decimal(str(plan.gpu_hours)) * plan.gpu_rate)
    return total.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def load_chat_template() -> str:
    return resources.files("instructforge.assets").joinpath("chat_template.txt").read_text("utf-8")


def filter_and_dedupe(envelopes, threshold_t: float) -> list[RecordEnvelope]:
    """Keep records with selected q strictly above t; among records sharing
    the same original text keep only the highest-q one. Output sorted by id."""
    kept = [env for env in envelopes
            if env.report and selected_score(env).q > threshold_t]
    best_by_text: dict[str, RecordEnvelope] = {}
    for env in sorted(kept, key=lambda e: e.record.id):
        key = env.record.original_text
        current = best_by_text.get(key)
        if current is None or selected_score(env).q > selected_score(current).q:
            best_by_text[key] = env
    return sorted(best_by_text.values(), key=lambda e: e.record.id)


def render_chat(document: str, speech: str, response: str,
                template: str | None = None) -> str:
    template = template if template is not None else load_chat_template()
    return (template.replace("{document}", document)
                    .replace("{speech}", speech)
                    .replace("{response}", response))


def selected_speech_path(env: RecordEnvelope) -> str:
    source = env.report.selected_candidate
    artifact = env.speeches.get(source)
    return artifact.audio_path if artifact else ""


def export_chat(envelopes, out_path, mode: str = MODE_GOLDEN,
                continuations: dict | None = None,
                bundle_dir=None) -> dict:
    """Write one JSON object per record:
    {system, document, user_instruction, speech_path, response}.

    golden mode takes the response from the record's reference answer;
    continue mode looks it up in an external continuation map keyed by
    record id. Records missing a response are excluded with a warning.
    With bundle_dir set, audio files are copied into a portable tree and
    speech_path rewritten relative to it.
    """
    if mode not in (MODE_GOLDEN, MODE_CONTINUE):
        raise ExportError(f"unknown export mode {mode!r}")
    if mode == MODE_CONTINUE and continuations is None:
        raise ExportError("continue mode requires a continuation file")
    template = load_chat_template()
    system_text = template.split("{document}")[0].split("<|im_start|>system")[1].strip()
    user_instruction = "Answer the following question with a short span. The answer needs to be just in a few words."

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if bundle_dir is not None:
        Path(bundle_dir, "audio").mkdir(parents=True, exist_ok=True)

    written = 0
    skipped = 0
    with out_path.open("w", encoding="utf-8") as fh:
        for env in envelopes:
            if mode == MODE_GOLDEN:
                response = env.record.reference_response
                if not response:
                    skipped += 1
                    log.warning("record %s: no reference response, excluded", env.record.id)
                    continue
            else:
                response = continuations.get(env.record.id)
                if not response:
                    skipped += 1
                    log.warning("record %s: no continuation, excluded", env.record.id)
                    continue
            speech_path = selected_speech_path(env)
            if bundle_dir is not None and speech_path:
                src = Path(speech_path)
                dest = Path(bundle_dir, "audio", src.name)
                if src.exists():
                    shutil.copy2(src, dest)
                speech_path = str(Path("audio", src.name))
            fh.write(json.dumps({
                "system": system_text,
                "document": env.record.context_document or "",
                "user_instruction": user_instruction,
                "speech_path": speech_path,
                "response": response,
            }, ensure_ascii=False, sort_keys=True) + "\n")
            written += 1
    return {"path": str(out_path), "written": written, "skipped": skipped}


def parse_rendered_chat(rendered: str) -> dict:
    """Recover {system, document, speech, response} from a rendered template."""
    def between(text: str, start: str, end: str) -> str:
        i = text.index(start) + len(start)
        return text[i:text.index(end, i)]

    system_block = between(rendered, "<|im_start|>system", "<|im_end|>").strip()
    user_block = between(rendered, "<|im_start|>user", "<|im_end|>").strip()
    response = between(rendered, "<|im_start|>assistant", "<|im_end|>").strip()
    # system block is the fixed sentence followed by the document
    parts = system_block.split("\n\n", 1)
    system = parts[0]
    document = parts[1] if len(parts) > 1 else ""
    user_lines = user_block.split("\n", 1)
    speech = user_lines[1].strip() if len(user_lines) > 1 else ""
    return {"system": system, "document": document, "speech": speech,
            "response": response}


def load_continuations(path) -> dict:
    """Continuation file: JSONL of {"id": ..., "response": ...}."""
    continuations = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            continuations[str(obj["id"])] = obj.get("response", "")
    return continuations


def export_records(manifest_path, out_path, threshold_t: float,
                   mode: str = MODE_GOLDEN, continuations_path=None,
                   bundle_dir=None) -> dict:
    envelopes = read_manifest(manifest_path)
    selected = filter_and_dedupe(envelopes, threshold_t)
    continuations = load_continuations(continuations_path) if continuations_path else None
    summary = export_chat(selected, out_path, mode=mode,
                          continuations=continuations, bundle_dir=bundle_dir)
    summary["selected"] = len(selected)
    return summary
