"""Deterministic mock providers for offline runs and tests.

Rewriters: identity, rule-based number expander.
Transcribers: oracle (reads the synthesizer's ground-truth sidecar),
seeded word deleter, seeded word substituter, digit corruptor.
Embedder: hashed character n-gram counts.

Every mock is a pure function of (seed, inputs), so a full mock pipeline
run is bit-reproducible.
"""

from __future__ import annotations

import hashlib
import random
from pathlib import Path

import numpy as np

from .base import (Embedder, InvalidInputError, ProviderSpec, Rewriter,
                   Synthesizer, Transcriber)

# ---------------------------------------------------------------------------
# Number-to-words tables for the rule-based rewriter mock

_ONES = ["zero", "one", "two", "three", "four", "five", "six", "seven",
         "eight", "nine", "ten", "eleven", "twelve", "thirteen", "fourteen",
         "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"]
_TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
         "eighty", "ninety"]


def _two_digit_words(n: int) -> str:
    if n < 20:
        return _ONES[n]
    tens, ones = divmod(n, 10)
    return _TENS[tens] if ones == 0 else f"{_TENS[tens]}-{_ONES[ones]}"


def _three_digit_words(n: int) -> str:
    hundreds, rest = divmod(n, 100)
    if hundreds == 0:
        return _two_digit_words(rest)
    words = f"{_ONES[hundreds]} hundred"
    return words if rest == 0 else f"{words} {_two_digit_words(rest)}"


def number_to_words(n: int) -> str:
    """English words for 0..9999; 4-digit values read year-style in pairs."""
    if not 0 <= n <= 9999:
        raise ValueError(f"number_to_words supports 0..9999, got {n}")
    if n < 1000:
        return _three_digit_words(n)
    head, tail = divmod(n, 100)
    if tail == 0:
        return f"{_two_digit_words(head)} hundred"
    if head % 10 == 0 and tail < 10:
        # e.g. 2005 -> "two thousand five"
        return f"{_ONES[head // 10]} thousand {_two_digit_words(tail)}"
    return f"{_two_digit_words(head)} {_two_digit_words(tail)}"


def _split_token(token: str) -> tuple[str, str, str]:
    """Split a whitespace token into (leading punct, core, trailing punct)."""
    start = 0
    end = len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[:start], token[start:end], token[end:]


def expand_numbers(text: str) -> str:
    """Replace digit-only tokens with their English-word reading."""
    out = []
    for token in text.split():
        lead, core, trail = _split_token(token)
        if core.isdigit() and len(core) <= 4:
            out.append(f"{lead}{number_to_words(int(core))}{trail}")
        else:
            out.append(token)
    return " ".join(out)


class IdentityRewriter(Rewriter):
    def _rewrite(self, original_text: str) -> str:
        return original_text


class NumberExpanderRewriter(Rewriter):
    def _rewrite(self, original_text: str) -> str:
        return expand_numbers(original_text)


class EmptyRewriter(Rewriter):
    """Always returns an empty response; exercises the fallback path."""

    def _rewrite(self, original_text: str) -> str:
        return ""


class FailingRewriter(Rewriter):
    def _rewrite(self, original_text: str) -> str:
        from .base import ProviderError
        raise ProviderError(f"mock rewriter {self.spec.name} configured to fail")


# ---------------------------------------------------------------------------

class MockSynthesizer(Synthesizer):
    """Placeholder audio: hash-derived samples, 0.02 s per input character."""

    def _synthesize(self, text: str, speaker_description: str):
        digest = hashlib.sha256(
            f"{text}\x00{speaker_description}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        n = max(int(0.02 * len(text) * self.sample_rate), self.sample_rate // 10)
        samples = rng.uniform(-0.5, 0.5, size=n)
        return samples, self.sample_rate


# ---------------------------------------------------------------------------

def _sidecar_text(artifact) -> str:
    path = Path(artifact.audio_path).with_suffix(".txt")
    if not path.exists():
        raise InvalidInputError(f"no ground-truth sidecar next to {artifact.audio_path}")
    return path.read_text(encoding="utf-8")


def _word_rng(seed: int, text: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}\x00{text}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class OracleTranscriber(Transcriber):
    def _transcribe(self, artifact) -> str:
        return _sidecar_text(artifact)


class WordDeleterTranscriber(Transcriber):
    """Deletes each word independently with probability p; seeded per text."""

    def __init__(self, spec: ProviderSpec, seed: int = 0, p: float = 0.1):
        super().__init__(spec)
        self.seed = seed
        self.p = p

    def _transcribe(self, artifact) -> str:
        text = _sidecar_text(artifact)
        rng = _word_rng(self.seed, text)
        return " ".join(w for w in text.split() if rng.random() >= self.p)


_SUBSTITUTES = ["um", "gah", "blur", "mmh", "err"]


class WordSubstituterTranscriber(Transcriber):
    """Replaces each word with filler noise with probability p; seeded."""

    def __init__(self, spec: ProviderSpec, seed: int = 0, p: float = 0.1):
        super().__init__(spec)
        self.seed = seed
        self.p = p

    def _transcribe(self, artifact) -> str:
        text = _sidecar_text(artifact)
        rng = _word_rng(self.seed, text)
        return " ".join(rng.choice(_SUBSTITUTES) if rng.random() < self.p else w
                        for w in text.split())


# long junk so the hashed n-gram cosine drops well below alpha
_DIGIT_JUNK = "krzxqv glorpian zzyzx"


class DigitCorruptorTranscriber(Transcriber):
    """Mangles every digit-bearing word: simulates a TTS/ASR chain that
    cannot voice out-of-vocabulary numerals."""

    def _transcribe(self, artifact) -> str:
        text = _sidecar_text(artifact)
        return " ".join(_DIGIT_JUNK if any(ch.isdigit() for ch in w) else w
                        for w in text.split())


class FailingTranscriber(Transcriber):
    def _transcribe(self, artifact) -> str:
        from .base import ProviderError
        raise ProviderError(f"mock transcriber {self.spec.name} configured to fail")


# ---------------------------------------------------------------------------

class HashingEmbedder(Embedder):
    """Character n-gram counts hashed into a fixed-dimension vector.

    With normalize_numbers=True, digit tokens are expanded to their word
    reading before hashing, approximating a semantic embedder that treats
    "1999" and "nineteen ninety-nine" as the same content.
    """

    def __init__(self, spec: ProviderSpec, cache_dir=None, dim: int = 64, n: int = 3,
                 normalize_numbers: bool = False):
        super().__init__(spec, cache_dir)
        self.dim = dim
        self.n = n
        self.normalize_numbers = normalize_numbers

    @property
    def dimension(self) -> int:
        return self.dim

    def _embed(self, text: str) -> np.ndarray:
        if self.normalize_numbers:
            text = expand_numbers(text)
        padded = f" {text} "
        vec = np.zeros(self.dim)
        for i in range(max(len(padded) - self.n + 1, 1)):
            gram = padded[i:i + self.n]
            digest = hashlib.sha256(f"{self.spec.name}\x00{gram}".encode("utf-8")).digest()
            vec[int.from_bytes(digest[:4], "big") % self.dim] += 1.0
        return vec


# ---------------------------------------------------------------------------
# Factory

_REWRITERS = {
    "identity": IdentityRewriter,
    "number_expander": NumberExpanderRewriter,
    "empty": EmptyRewriter,
    "failing": FailingRewriter,
}


def build_mock(spec: ProviderSpec, cache_dir=None):
    behavior = dict(spec.mock_behavior)
    name = behavior.pop("behavior", None)
    if spec.role == "rewriter":
        cls = _REWRITERS.get(name or "identity")
        if cls is None:
            raise InvalidInputError(f"unknown mock rewriter behavior {name!r}")
        return cls(spec)
    if spec.role == "synthesizer":
        return MockSynthesizer(spec, cache_dir)
    if spec.role == "transcriber":
        if name in (None, "oracle"):
            return OracleTranscriber(spec)
        if name == "word_deleter":
            return WordDeleterTranscriber(spec, seed=behavior.get("seed", 0),
                                          p=behavior.get("p", 0.1))
        if name == "word_substituter":
            return WordSubstituterTranscriber(spec, seed=behavior.get("seed", 0),
                                              p=behavior.get("p", 0.1))
        if name == "digit_corruptor":
            return DigitCorruptorTranscriber(spec)
        if name == "failing":
            return FailingTranscriber(spec)
        raise InvalidInputError(f"unknown mock transcriber behavior {name!r}")
    if spec.role == "embedder":
        if name in (None, "char_ngram"):
            return HashingEmbedder(spec, cache_dir, dim=behavior.get("dim", 64),
                                   n=behavior.get("n", 3),
                                   normalize_numbers=behavior.get("normalize_numbers", False))
        raise InvalidInputError(f"unknown mock embedder behavior {name!r}")
    raise InvalidInputError(f"unknown role {spec.role!r}")
