"""One test per acceptance criterion, each at its stated tolerance and time limit."""

import functools
import hashlib
import itertools
import json
import math
import random
import os
import socket
import string
import subprocess
import sys
import time
import unicodedata
from fractions import Fraction
from pathlib import Path

import mpmath
import pytest

from diageval import datagen, pipeline
from diageval.checks import FailureMode, run_deterministic_checks
from diageval.feedback import score_annotation
from diageval.gateway import Cassette, Gateway
from diageval.judge import CRITIQUE, build_judge_prompt, parse_judge_response
from diageval.metaeval import kendall_tau_b, pearson, williams_test
from diageval.ranking import SampledOutput, build_pairs, pair_loss
from diageval.records import dumps, read_jsonl
from diageval.report import (DiagnosticReport, ErrorAnnotation, EvalInstance, Severity,
                             parse_report, render_report)
from diageval.scoring import score_report

from conftest import ACCEPTANCE_LINES, FIXTURES, load_case, report_text
from oracles import pearson_naive, tau_b_brute, williams_mp

sys.path.insert(0, str(FIXTURES / "e2e"))
import record  # noqa: E402

E2E = FIXTURES / "e2e"


def criterion(n, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                ACCEPTANCE_LINES[n] = (f"[FAIL] {n:>2}. {title}: "
                                       f"{type(exc).__name__}: {str(exc).splitlines()[0][:120]}")
                raise
            ACCEPTANCE_LINES[n] = (f"[PASS] {n:>2}. {title} ({time.perf_counter() - t0:.2f}s)"
                                   + (f" {detail}" if detail else ""))
        return run
    return wrap


def elapsed_under(limit, t0):
    took = time.perf_counter() - t0
    assert took < limit, f"took {took:.2f}s, limit {limit}s"


# --- 1 ----------------------------------------------------------------------------

# header count, majors, minors, score: counted by hand from the printed reports
FIXTURE_EXPECTED = {
    "misalignment": (4, 3, 1, -16),
    "repetition": (3, 2, 1, -11),
    "multiple": (2, 2, 0, -10),
    "logic": (2, 1, 1, -6),
    "critique": (2, 1, 1, -6),
}


@criterion(1, "fixture reports parse strict and score by -5/-1")
def test_c01_fixture_scores():
    t0 = time.perf_counter()
    got = {}
    for name, (count, major, minor, score) in FIXTURE_EXPECTED.items():
        text = report_text(name)
        header = int(text.split()[3])
        r = parse_report(text, "strict")
        assert header == count == r.declared_count == len(r.annotations)
        s = score_report(r)
        assert (s.n_major, s.n_minor) == (major, minor)
        assert s.value == -5 * major - minor == score
        got[name] = s.value
    elapsed_under(1.0, t0)
    return " ".join(f"{k}={v}" for k, v in got.items())


# --- 2 ----------------------------------------------------------------------------

_ALPHABET = (string.ascii_letters + string.digits + " .,;:'\"-*_()[]…“”"
             + "éüñçøßあ中文한국어дж")


def _field(rng):
    while True:
        s = "".join(rng.choice(_ALPHABET) for _ in range(rng.randint(1, 40)))
        s = unicodedata.normalize("NFC", s).strip()
        if s:
            return s


def _random_report(rng):
    n = rng.randint(0, 5)
    return DiagnosticReport(n, tuple(
        ErrorAnnotation(i, _field(rng), rng.choice([Severity.MAJOR, Severity.MINOR]),
                        _field(rng), _field(rng)) for i in range(1, n + 1)))


@criterion(2, "1,000 random reports round-trip exactly")
def test_c02_round_trip():
    t0 = time.perf_counter()
    rng = random.Random(2)
    for _ in range(1000):
        r = _random_report(rng)
        r.validate()
        assert parse_report(render_report(r), "strict") == r
    elapsed_under(5.0, t0)


# --- 3 ----------------------------------------------------------------------------

FIELD_OF = {"M1": "type", "M2": "location", "M3": "location",
            "M4": "explanation", "M5": "explanation"}


@criterion(3, "feedback algebra over all 2^10 failure-mode subsets")
def test_c03_feedback_algebra():
    t0 = time.perf_counter()
    modes = list(FailureMode)
    n = 0
    for bits in range(1 << len(modes)):
        subset = [m for k, m in enumerate(modes) if bits >> k & 1]
        fb = score_annotation(subset)
        fields = fb.fields.to_dict()
        if any(m.value.startswith("G") for m in subset):
            assert fields == {"type": 0, "location": 0, "explanation": 0}
            assert fb.score == 0
        else:
            dead = {FIELD_OF[m.value] for m in subset}
            assert fields == {f: int(f not in dead) for f in fields}
        assert fb.score == Fraction(sum(fields.values()), 3)
        assert type(fb.score) is Fraction
        n += 1
    assert n == 1024
    elapsed_under(1.0, t0)


# --- 4 ----------------------------------------------------------------------------

@criterion(4, "pair construction on 2,000 instances x 8 samples")
def test_c04_pairs():
    t0 = time.perf_counter()
    rng = random.Random(4)
    samples = {}
    for i in range(2000):
        iid = f"inst{i:04d}"
        dens = [rng.choice([3, 6, 9]) for _ in range(8)]
        samples[iid] = [SampledOutput(iid, k, feedback=Fraction(rng.randint(0, d), d))
                        for k, d in enumerate(dens)]
    pairs, stats = build_pairs(samples)
    assert stats.comparisons_possible == 56_000
    assert stats.pairs_emitted + stats.ties_removed == 56_000
    assert stats.pairs_emitted == len(pairs)
    seen = set()
    for p in pairs:
        fb = {s.sample_index: s.feedback for s in samples[p.instance_id]}
        assert fb[p.winner] > fb[p.loser] and p.margin == fb[p.winner] - fb[p.loser]
        key = (p.instance_id, p.winner, p.loser)
        assert (p.instance_id, p.loser, p.winner) not in seen
        seen.add(key)
    elapsed_under(10.0, t0)
    return f"pairs={stats.pairs_emitted} ties={stats.ties_removed}"


# --- 5 ----------------------------------------------------------------------------

@criterion(5, "pair loss values")
def test_c05_loss():
    assert abs(pair_loss(0.0, 0.0) - math.log(2)) <= 1e-12
    mpmath.mp.dps = 50
    reference = float(mpmath.log(1 + mpmath.exp(-1)))
    assert abs(pair_loss(1.0, 0.0) - reference) <= 1e-9
    assert pair_loss(20.0, 0.0) < 1e-8
    return f"loss(1)={pair_loss(1.0, 0.0):.12f}"


# --- 6 ----------------------------------------------------------------------------

@criterion(6, "tau-b and Pearson match O(n^2)/naive oracles on 500 vectors (n=2..50)")
def test_c06_correlations():
    rng = random.Random(6)
    worst = 0.0
    for k in range(500):
        n = rng.randint(2, 50)
        x = [float(rng.randint(0, 6)) if k % 2 else rng.gauss(0, 1) for _ in range(n)]
        y = [v * rng.uniform(-1, 1) + float(rng.randint(0, 4)) for v in x]
        for j in rng.sample(range(n), n // 4):  # inject ties
            y[j] = y[0]
        x[0], x[1] = 0.0, 1.0  # neither vector may be constant
        y[1] = y[0] + 1.0
        dt = abs(kendall_tau_b(x, y) - tau_b_brute(x, y))
        dp = abs(pearson(x, y) - pearson_naive(x, y))
        assert dt <= 1e-12 and dp <= 1e-12
        worst = max(worst, dt, dp)
    return f"max |d|={worst:.1e}"


# --- 7 ----------------------------------------------------------------------------

@criterion(7, "Williams test")
def test_c07_williams():
    w = williams_test(0.45, 0.45, 0.6, 200)
    assert w.t == 0 and w.p == 1
    w = williams_test(0.517, 0.425, 0.7, 1000)
    t, p = williams_mp(0.517, 0.425, 0.7, 1000)
    assert abs(w.t - t) <= 1e-9 and abs(w.p - p) <= 1e-9
    ps = [williams_test(0.5, 0.4, 0.6, n).p for n in range(6, 3000, 11)]
    assert all(b < a for a, b in zip(ps, ps[1:]))
    return f"t={w.t:.4f} p={w.p:.3e}"


# --- 8 ----------------------------------------------------------------------------

@criterion(8, "deterministic checks: M3 property, G5 and G2 cases")
def test_c08_checks():
    rng = random.Random(8)
    for _ in range(1000):
        cand = "".join(rng.choice(_ALPHABET) for _ in range(rng.randint(5, 80)))
        if not cand.strip():
            continue
        inst = EvalInstance("p", "reference", cand)
        i = rng.randrange(len(inst.candidate))
        span = inst.candidate[i:rng.randint(i + 1, len(inst.candidate))].strip()
        if not span:
            continue
        loc = f'"{span}"' if rng.random() < 0.5 else span
        r = DiagnosticReport(1, (ErrorAnnotation(1, "type", Severity.MINOR, loc, "expl"),))
        assert FailureMode.M3 not in run_deterministic_checks(inst, r)[0].triggered

    logic = run_deterministic_checks(load_case("logic"), parse_report(report_text("logic")))
    assert FailureMode.G5 in logic[0].triggered

    inst = EvalInstance("g2", "Can you ask them for me?", "Can you ask for me?")
    dup = DiagnosticReport(2, (
        ErrorAnnotation(1, "Incorrect translation has stylistic problems", Severity.MAJOR,
                        '"Can you ask for me?"', "It changes who is asking."),
        ErrorAnnotation(2, "Problems with grammar, other than orthography", Severity.MINOR,
                        '"Can you ask for me?"', "The grammar is slightly off."),
    ))
    assert all(FailureMode.G2 in o.triggered for o in run_deterministic_checks(inst, dup))


# --- 9 ----------------------------------------------------------------------------

@criterion(9, "critique prompt texts and the recorded judge reply")
def test_c09_judge():
    report = parse_report(report_text("critique"))
    prompt = build_judge_prompt(CRITIQUE, load_case("critique"), report).encode("utf-8")
    questions = (FIXTURES / "critique_questions.txt").read_text(encoding="utf-8").splitlines()
    assert len(questions) == 7
    for q in questions:
        assert q.encode("utf-8") in prompt
    a = parse_judge_response(CRITIQUE, (FIXTURES / "critique_reply.txt").read_text(), 2)
    assert a.per_annotation[0].q4_severity == "major-error"
    assert a.q7_repetition is False and a.q7_pair_count == 0


# --- 10 ---------------------------------------------------------------------------

def _datagen_run():
    gw = Gateway("replay", Cassette.load(E2E / "datagen_cassette.jsonl"))
    records, manifest = datagen.synthesize(gw, record.raw_texts(record.DATAGEN_RECORDS),
                                           record.DATAGEN_SEED)
    body = "".join(dumps(r.to_dict()) + "\n" for r in records)
    return records, body + dumps(manifest) + "\n"


@criterion(10, "datagen taxonomy, seeded replay determinism, fine-tune targets")
def test_c10_datagen():
    rows = [ln.split("\t") for ln in (FIXTURES / "taxonomy.tsv").read_text().splitlines()]
    assert len(datagen.TAXONOMY) == 18
    for t, (cat, name, desc) in zip(datagen.TAXONOMY, rows, strict=True):
        assert (t.category, t.name) == (cat, name)
        assert t.description.encode("utf-8") == desc.encode("utf-8")
    records, first = _datagen_run()
    _, second = _datagen_run()
    assert first == second
    assert len(records) == record.DATAGEN_RECORDS
    for rec in records:
        ft = datagen.to_finetune_record(rec)
        assert parse_report(ft["target"], "strict") == rec.report
    return f"sha256={hashlib.sha256(first.encode()).hexdigest()[:16]}"


# --- 11 ---------------------------------------------------------------------------

def _pipeline_run():
    gw = Gateway("replay", Cassette.load(E2E / "pipeline_cassette.jsonl"))
    instances = [EvalInstance.from_dict(r) for r in read_jsonl(E2E / "instances.jsonl")]
    out = pipeline.run_all(gw, instances)
    return "".join(f"## {stage}\n" + "".join(dumps(r) + "\n" for r in rows)
                   for stage, rows in out.items())


@criterion(11, "end-to-end replay is byte-identical with zero network calls")
def test_c11_end_to_end(monkeypatch):
    t0 = time.perf_counter()
    attempts = []

    def no_network(*args, **kwargs):
        attempts.append(args)
        raise AssertionError("network access during replay")

    monkeypatch.setattr(socket.socket, "connect", no_network)
    monkeypatch.setattr(socket, "create_connection", no_network)
    first = _pipeline_run()
    second = _pipeline_run()
    assert first == second
    assert attempts == []
    for stage in ("samples", "checks", "judge", "feedback", "pairs", "reranked", "scores"):
        assert f"## {stage}\n" in first
    digest = hashlib.sha256(first.encode()).hexdigest()
    # a fresh interpreter with different hash randomisation gives the same bytes
    code = ("import hashlib, sys; sys.path[:0] = sys.argv[1:]; import test_acceptance as t; "
            "print(hashlib.sha256(t._pipeline_run().encode()).hexdigest())")
    env = {**os.environ, "PYTHONHASHSEED": "12345"}
    here = str(Path(__file__).parent)
    out = subprocess.run([sys.executable, "-c", code, here], env=env, capture_output=True,
                         text=True, check=True, cwd=here)
    assert out.stdout.strip() == digest
    elapsed_under(30.0, t0)
    return f"sha256={digest[:16]}"
