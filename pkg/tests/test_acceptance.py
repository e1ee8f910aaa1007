"""Release acceptance gate.

One test per acceptance criterion; each prints a single [PASS]/[FAIL] line
(visible with `pytest -v -s` or in captured output) in addition to the
normal pytest verdict.
"""

import functools
import itertools
import json
import random
import sys
import time
from contextlib import contextmanager
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

from instructforge import fusion, pipeline, textmetrics
from instructforge.exporter import (CostPlan, estimate_cost, filter_and_dedupe,
                                    parse_rendered_chat, render_chat)
from instructforge.pipeline import run_batch, selected_score
from instructforge.records import (CandidateScore, CandidateText,
                                   InstructionRecord, QualityReport,
                                   RecordEnvelope, SOURCE_ORIGINAL, read_manifest)
from instructforge.textmetrics import (_levenshtein, cosine, pass_rate,
                                       quality_q, sim_aggregate, similarity_F, wer)

from conftest import make_config, spec, write_corpus


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


# ---------------------------------------------------------------------------
# 1. Cost model exactness

def test_cost_model_exact_to_the_cent():
    with criterion("cost model reproduces all known totals to the cent in < 1 s"):
        start = time.monotonic()
        cases = [
            (562, 0, "4215.00"),
            (281, 6, "2110.02"),
            (281, 16, "2114.22"),
            (0, 14, "5.88"),
            (0, 127, "53.34"),
            (0, 82, "34.44"),
            (0, 534, "224.28"),
            (0, 558, "234.36"),
        ]
        for human, gpu, expected in cases:
            got = estimate_cost(CostPlan(human_hours=human, gpu_hours=gpu))
            assert got == Decimal(expected), (human, gpu, got, expected)
        assert time.monotonic() - start < 1.0


# ---------------------------------------------------------------------------
# 2. WER against an independent recursive edit-distance oracle

def _recursive_distance():
    sys.setrecursionlimit(10000)

    @functools.lru_cache(maxsize=None)
    def oracle(a, b):
        if not a:
            return len(b)
        if not b:
            return len(a)
        return min(oracle(a[1:], b) + 1,
                   oracle(a, b[1:]) + 1,
                   oracle(a[1:], b[1:]) + (a[0] != b[0]))

    return oracle


def test_wer_matches_recursive_oracle():
    with criterion("WER equals the recursive oracle: exhaustive length <= 6 over "
                   "3 symbols plus 500 random length <= 20 cases, in < 30 s"):
        start = time.monotonic()
        oracle = _recursive_distance()

        symbols = ("a", "b", "c")
        seqs = [t for length in range(7)
                for t in itertools.product(symbols, repeat=length)]
        lists = [list(s) for s in seqs]
        # edit distance is symmetric, so checking every unordered pair in
        # both DP argument orders covers all ordered pairs
        for i, (a, la) in enumerate(zip(seqs, lists)):
            for j in range(i, len(seqs)):
                d = _levenshtein(la, lists[j])
                assert d == oracle(a, seqs[j]), (a, seqs[j])
                assert d == _levenshtein(lists[j], la), (a, seqs[j])

        rng = random.Random(20240817)
        words = [f"w{k}" for k in range(8)]
        for _ in range(500):
            ref = [rng.choice(words) for _ in range(rng.randint(0, 20))]
            hyp = [rng.choice(words) for _ in range(rng.randint(0, 20))]
            distance = oracle(tuple(ref), tuple(hyp))
            assert _levenshtein(ref, hyp) == distance
            if ref:  # tie the rate itself to the oracle too
                assert wer(" ".join(ref), " ".join(hyp),
                           textmetrics.IDENTITY_POLICY) == distance / len(ref)
        assert time.monotonic() - start < 30.0


# ---------------------------------------------------------------------------
# 3. Similarity / quality / pass-rate property suite

def test_similarity_quality_property_suite():
    with criterion("similarity F, quality q, and pass rate invariants hold over "
                   "1000 randomized cases each"):
        rng = random.Random(97)

        def vec(dim):
            return np.array([rng.uniform(-1, 1) for _ in range(dim)]) + 1e-9

        # F is invariant under embedder enumeration order
        for _ in range(1000):
            dim = rng.randint(2, 8)
            names = [f"m{k}" for k in range(rng.randint(1, 5))]
            orig = {n: vec(dim) for n in names}
            trans = {n: vec(dim) for n in names}
            shuffled = list(names)
            rng.shuffle(shuffled)
            assert similarity_F(orig, trans) == pytest.approx(
                similarity_F({n: orig[n] for n in shuffled},
                             {n: trans[n] for n in shuffled}), abs=1e-12)

        # cosine is invariant under positive rescaling, so the q-argmax is too
        for _ in range(1000):
            dim = rng.randint(2, 8)
            u, v = vec(dim), vec(dim)
            lam, mu = rng.uniform(0.01, 100), rng.uniform(0.01, 100)
            assert cosine(lam * u, mu * v) == pytest.approx(cosine(u, v), abs=1e-9)
        for _ in range(1000):
            dim = rng.randint(2, 8)
            ref = vec(dim)
            cands = [vec(dim) for _ in range(rng.randint(1, 6))]
            scale = rng.uniform(0.01, 100)
            _, arg_plain = quality_q([cosine(ref, c) for c in cands])
            _, arg_scaled = quality_q([cosine(scale * ref, scale * c) for c in cands])
            assert arg_plain == arg_scaled

        # q never decreases when more transcripts are added
        for _ in range(1000):
            base = [rng.uniform(0, 1) for _ in range(rng.randint(1, 6))]
            extra = base + [rng.uniform(0, 1) for _ in range(rng.randint(1, 4))]
            assert quality_q(extra)[0] >= quality_q(base)[0]

        # pass rate is non-increasing in the threshold
        for _ in range(1000):
            qs = [rng.uniform(0, 1) for _ in range(rng.randint(1, 30))]
            lo, hi = sorted((rng.uniform(0, 1), rng.uniform(0, 1)))
            assert pass_rate(qs, lo) >= pass_rate(qs, hi)


# ---------------------------------------------------------------------------
# 4. End-to-end determinism across parallelism

def _noisy_config(tmp_path, workers, name):
    return make_config(
        tmp_path,
        rewriters=(spec("rewriter", "num", {"behavior": "number_expander"}),),
        transcribers=(
            spec("transcriber", "faithful"),
            spec("transcriber", "dropper",
                 {"behavior": "word_deleter", "seed": 11, "p": 0.1}),
            spec("transcriber", "mumbler",
                 {"behavior": "word_substituter", "seed": 23, "p": 0.1}),
        ),
        max_parallel_requests=workers,
        manifest_path=str(tmp_path / name),
        rng_seed=42,
    )


def test_end_to_end_determinism_across_parallelism(tmp_path):
    with criterion("200-record noisy-mock batch is byte-identical across serial, "
                   "4-way, and 16-way runs; SIM and Pass agree to 12 decimals"):
        corpus = write_corpus(
            tmp_path / "corpus.jsonl",
            [f"Question {i} concerns the year {1800 + i} somehow?" for i in range(200)])
        outputs = []
        metrics = []
        for workers in (1, 4, 16):
            cfg = _noisy_config(tmp_path, workers, f"manifest-{workers}.jsonl")
            path, state = run_batch(corpus, cfg, "bulk")
            assert state.scored == 200 and state.failed == 0
            outputs.append(Path(path).read_bytes())
            qs = [selected_score(e).q for e in read_manifest(path)]
            metrics.append((round(float(np.mean(qs)) * 100, 12),
                            round(pass_rate(qs, cfg.alpha), 12)))
        assert outputs[0] == outputs[1] == outputs[2]
        assert metrics[0] == metrics[1] == metrics[2]


# ---------------------------------------------------------------------------
# 5. Selection correctness: rewriting rescues digit-corrupted records

SELECTION_QUESTIONS = [
    "What happened in 1999?",
    "Who won the final in 1987?",
    "When did flight 370 vanish?",
    "How long is route 66?",
    "What was signed in 1648?",
    "Who ruled until 1917?",
    "What begins at mile 0?",
    "Which act passed in 1964?",
    "What fell in 1989?",
    "Who landed in 1969?",
    "What erupted in 79?",
    "Which team won in 2010?",
    "What closed in 2001?",
    "Who reigned from 1558?",
    "What opened in 1889?",
    "Which war ended in 1945?",
    "What sailed in 1492?",
    "Who composed opus 27?",
    "What is the capital of France?",
    "Who wrote the national anthem?",
]


def _selection_config(tmp_path, rewriters, name):
    return make_config(
        tmp_path,
        rewriters=rewriters,
        transcribers=(spec("transcriber", "junk", {"behavior": "digit_corruptor"}),),
        embedders=(
            spec("embedder", "sem1",
                 {"behavior": "char_ngram", "normalize_numbers": True}),
            spec("embedder", "sem2",
                 {"behavior": "char_ngram", "dim": 128, "normalize_numbers": True}),
        ),
        manifest_path=str(tmp_path / name),
        max_parallel_requests=1,
    )


def test_rewriting_rescues_digit_corrupted_records(tmp_path):
    with criterion("digit-corrupting transcription: pass rate moves from exactly "
                   "0.10 (originals only) to 1.00 with the number-expanding "
                   "rewriter, which wins selection on every affected record"):
        corpus = write_corpus(tmp_path / "corpus.jsonl", SELECTION_QUESTIONS)

        baseline = _selection_config(tmp_path, (), "baseline.jsonl")
        _, base_state = run_batch(corpus, baseline, "sel")
        assert base_state.pass_rate == 0.10

        ours = _selection_config(
            tmp_path, (spec("rewriter", "num", {"behavior": "number_expander"}),),
            "ours.jsonl")
        path, ours_state = run_batch(corpus, ours, "sel")
        assert ours_state.pass_rate == 1.00
        assert ours_state.pass_rate > base_state.pass_rate

        for env in read_manifest(path):
            affected = any(ch.isdigit() for ch in env.record.original_text)
            if affected:
                assert env.report.selected_candidate == "rewriter:num", env.record.id
            else:
                assert env.report.selected_candidate == SOURCE_ORIGINAL, env.record.id


# ---------------------------------------------------------------------------
# 6. Fusion monotonicity and partition re-scan

def _rescan_partition(manifest_path, alpha):
    """Independent re-derivation of the success/failure split from raw JSON."""
    successes, failures = set(), set()
    for line in Path(manifest_path).read_text(encoding="utf-8").splitlines():
        obj = json.loads(line)
        report = obj["report"]
        by_ref = {c["candidate_ref"]: c["q"] for c in report["per_candidate"]}
        q_orig = by_ref["original"]
        selected = report["selected_candidate"]
        q_best = by_ref[selected]
        rid = obj["record"]["id"]
        if q_best > alpha and q_orig < alpha and selected != "original":
            successes.add(rid)
        elif q_best < alpha:
            failures.add(rid)
    return successes, failures


def test_fusion_never_regresses(tmp_path):
    with criterion("fusion pass never lowers SIM or Pass, and its partition "
                   "matches a brute-force manifest re-scan"):
        corpus = write_corpus(tmp_path / "corpus.jsonl", SELECTION_QUESTIONS)
        cfg = _selection_config(tmp_path, (), "fusion.jsonl")
        path, _ = run_batch(corpus, cfg, "sel")

        envelopes = read_manifest(path)
        successes, failures = fusion.partition(envelopes, cfg.alpha)
        scan_successes, scan_failures = _rescan_partition(path, cfg.alpha)
        assert {p.record_id for p in successes} == scan_successes
        assert {p.record_id for p in failures} == scan_failures

        def metrics(envs):
            qs = [selected_score(e).q for e in envs]
            return sim_aggregate(qs), pass_rate(qs, cfg.alpha)

        sim_before, pass_before = metrics(envelopes)
        fusion.fusion_pass(path, spec("rewriter", "fused",
                                      {"behavior": "number_expander"}), cfg)
        sim_after, pass_after = metrics(read_manifest(path))
        assert sim_after >= sim_before
        assert pass_after >= pass_before


# ---------------------------------------------------------------------------
# 7. Filter / dedupe against a brute-force oracle

def _score_env(rid, q, text):
    record = InstructionRecord(id=rid, dataset="d", original_text=text,
                               reference_response="ans", speaker_id="spk-000")
    score = CandidateScore(candidate_ref=SOURCE_ORIGINAL, sim_matrix=((q,),),
                           per_transcript_F=(q,), q=q, argmax_transcript=0)
    report = QualityReport(record_id=rid, per_candidate=(score,),
                           selected_candidate=SOURCE_ORIGINAL, selected_speech="",
                           selected_transcript=0, passes_alpha=q > 0.9)
    return RecordEnvelope(stage="scored", record=record,
                          candidates=[CandidateText(record_id=rid,
                                                    source=SOURCE_ORIGINAL, text=text)],
                          report=report)


def _group_by_original_argmax(envelopes, t):
    kept = [e for e in envelopes if selected_score(e).q > t]
    groups = {}
    for env in kept:
        groups.setdefault(env.record.original_text, []).append(env)
    winners = []
    for group in groups.values():
        best_q = max(selected_score(e).q for e in group)
        winners.append(min((e for e in group if selected_score(e).q == best_q),
                           key=lambda e: e.record.id))
    return sorted(winners, key=lambda e: e.record.id)


def test_filter_dedupe_matches_brute_force_oracle():
    with criterion("threshold filter plus per-original dedupe equals the "
                   "group-by-original-argmax oracle on 100 randomized manifests"):
        rng = random.Random(4242)
        texts = [f"question number {k}?" for k in range(6)]
        for _ in range(100):
            envelopes = [
                _score_env(f"r{i:03d}",
                           rng.choice([round(rng.uniform(0, 1), 3), 0.9, 1.0]),
                           rng.choice(texts))
                for i in range(rng.randint(0, 25))
            ]
            for t in (0.0, 0.5, 0.9, 0.99):
                got = [e.record.id for e in filter_and_dedupe(envelopes, t)]
                want = [e.record.id for e in _group_by_original_argmax(envelopes, t)]
                assert got == want, t


# ---------------------------------------------------------------------------
# 8. Export template fidelity

SYSTEM_SENTENCE = ("This is a chat between a user and an artificial intelligence "
                   "assistant. The assistant gives helpful, detailed, and polite "
                   "answers to the user's questions based on the context. The "
                   "assistant should also indicate when the answer cannot be found "
                   "in the context.")


def test_export_template_fidelity():
    with criterion("rendered chat contains the verbatim system sentence and the "
                   "round-trip parse recovers every field"):
        document = "The eiffel tower was completed in 1889."
        speech = "When was the eiffel tower completed?"
        response = "1889"
        rendered = render_chat(document, speech, response)
        assert SYSTEM_SENTENCE in rendered
        parsed = parse_rendered_chat(rendered)
        assert parsed == {"system": SYSTEM_SENTENCE, "document": document,
                          "speech": speech, "response": response}
