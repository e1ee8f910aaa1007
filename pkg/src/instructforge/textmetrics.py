"""Pure scoring math: normalization, WER, cosine similarity, the averaged
embedding similarity F, the max-over-transcripts quality q, candidate
selection, and the aggregate SIM / Pass / consistency metrics.

Everything here is a pure function; no provider I/O.
"""

from __future__ import annotations

import logging
import math
import unicodedata
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class MetricInputError(ValueError):
    """Invalid input to a metric (empty list, model mismatch, zero vector)."""


@dataclass(frozen=True)
class NormalizationPolicy:
    lowercase: bool = True
    strip_punctuation: bool = True
    collapse_whitespace: bool = True

    @classmethod
    def identity(cls) -> "NormalizationPolicy":
        return cls(lowercase=False, strip_punctuation=False, collapse_whitespace=False)


DEFAULT_POLICY = NormalizationPolicy()
IDENTITY_POLICY = NormalizationPolicy.identity()


def _strip_punct(text: str) -> str:
    return "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))


def normalize(text: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> list[str]:
    """Apply the policy and split on whitespace. Empty input yields []."""
    if policy.lowercase:
        text = text.lower()
    if policy.strip_punctuation:
        text = _strip_punct(text)
    # splitting on whitespace already collapses runs; the flag only matters
    # for callers that want the normalized string rather than tokens
    return text.split()


def normalize_text(text: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    """Normalized text form (tokens joined by single spaces)."""
    if policy == IDENTITY_POLICY:
        return text
    return " ".join(normalize(text, policy))


def _levenshtein(ref: list[str], hyp: list[str]) -> int:
    """Word-level edit distance, unit costs, two-row dynamic program."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    prev = list(range(len(hyp) + 1))
    for i, rtok in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, htok in enumerate(hyp, start=1):
            cost = 0 if rtok == htok else 1
            cur[j] = min(prev[j] + 1,        # deletion
                         cur[j - 1] + 1,     # insertion
                         prev[j - 1] + cost)  # substitution / match
        prev = cur
    return prev[-1]


def wer(reference: str, hypothesis: str,
        policy: NormalizationPolicy = DEFAULT_POLICY) -> float:
    """(S + D + I) / reference token count; may exceed 1.0.

    Empty reference with non-empty hypothesis is defined as
    hypothesis_token_count / 1 (with a warning); both empty -> 0.0.
    """
    ref = normalize(reference, policy)
    hyp = normalize(hypothesis, policy)
    if not ref:
        if not hyp:
            return 0.0
        log.warning("wer: empty reference against %d hypothesis tokens", len(hyp))
        return float(len(hyp))
    return _levenshtein(ref, hyp) / len(ref)


def cosine(u, v) -> float:
    """Cosine similarity, clamped into [-1, 1] against float drift."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise MetricInputError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise MetricInputError("cosine of a zero vector")
    value = float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
    # snap float drift so identical vectors score exactly 1.0
    if abs(abs(value) - 1.0) < 1e-12:
        value = math.copysign(1.0, value)
    return value


def similarity_F(original_embeds: dict, transcript_embeds: dict) -> float:
    """Mean over embedding models of the per-model cosine.

    Both dicts map embedder name -> vector and must cover the same models.
    """
    if not original_embeds:
        raise MetricInputError("no embedders")
    if set(original_embeds) != set(transcript_embeds):
        raise MetricInputError(
            f"embedder set mismatch: {sorted(original_embeds)} vs {sorted(transcript_embeds)}")
    return float(np.mean([cosine(original_embeds[name], transcript_embeds[name])
                          for name in sorted(original_embeds)]))


def quality_q(F_values) -> tuple[float, int]:
    """Max over per-transcript F values; ties take the smallest index."""
    values = list(F_values)
    if not values:
        raise MetricInputError("quality_q of empty F list")
    best = max(values)
    return best, values.index(best)


def select_best(candidates, q_values, source_rank) -> int:
    """Index of the max-q candidate; ties prefer the lower source rank.

    `source_rank(candidate)` must order original < rewriters (config
    order) < fusion, so a rewrite never displaces the original without a
    strictly better q.
    """
    if not candidates:
        raise MetricInputError("select_best over no candidates")
    best = 0
    for i in range(1, len(candidates)):
        if q_values[i] > q_values[best] or (
                q_values[i] == q_values[best]
                and source_rank(candidates[i]) < source_rank(candidates[best])):
            best = i
    return best


def pass_rate(q_values, alpha: float) -> float:
    """Fraction of values strictly greater than alpha."""
    values = list(q_values)
    if not values:
        raise MetricInputError("pass_rate of empty list")
    return sum(1 for q in values if q > alpha) / len(values)


def sim_aggregate(q_values) -> float:
    """Mean quality scaled to a percentage, reported to 2 decimals."""
    values = list(q_values)
    if not values:
        raise MetricInputError("sim_aggregate of empty list")
    return round(float(np.mean(values)) * 100.0, 2)


def sim_wer_consistency(records) -> float:
    """Fraction of records where the max-F transcript also has minimal WER.

    Each record is a pair (F_values, wer_values) over the same transcripts.
    Ties in WER count as consistent. Records with fewer than 2 transcripts
    are skipped with a warning and excluded from the denominator.
    """
    consistent = 0
    counted = 0
    for F_values, wer_values in records:
        if len(F_values) != len(wer_values):
            raise MetricInputError("F/WER length mismatch")
        if len(F_values) < 2:
            log.warning("sim_wer_consistency: record with <2 transcripts skipped")
            continue
        counted += 1
        _, argmax = quality_q(F_values)
        if math.isclose(wer_values[argmax], min(wer_values), rel_tol=0, abs_tol=1e-12):
            consistent += 1
    if counted == 0:
        raise MetricInputError("no records with >=2 transcripts")
    return consistent / counted
