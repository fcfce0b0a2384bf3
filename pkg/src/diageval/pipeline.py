"""Record-level pipeline stages shared by the CLI and the demos.

Stages exchange plain dict rows (one JSONL line each). A *sample row* is one
evaluator output for one instance::

    {"instance_id": ..., "sample_index": 0, "raw": "...", "report": {...}}

with ``"error"`` in place of ``"report"`` when the raw text would not parse.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import templates
from .checks import CheckOutcome, run_deterministic_checks
from .datagen import build_instruction
from .feedback import aggregate_instance, score_annotation
from .gateway import ChatRequest, Gateway
from .judge import (CRITIQUE, JudgeAnswers, JudgeError, build_judge_prompt,
                    extractions_from_answers, map_answers_to_failures,
                    parse_judge_response, prompt_kind)
from .ranking import SampledOutput, rerank
from .records import iter_sorted
from .report import DiagnosticReport, EvalInstance, ReportError, parse_report

GREEDY = {"temperature": 0.0, "top_p": 1.0, "n_samples": 1}
SAMPLING = {"temperature": 0.8, "top_p": 0.9, "n_samples": 8}


def _key(row: Mapping) -> tuple[str, int]:
    return str(row["instance_id"]), int(row.get("sample_index", 0))


def report_of(row: Mapping) -> DiagnosticReport | None:
    if "report" in row and row["report"] is not None:
        return DiagnosticReport.from_dict(row["report"])
    if "error" in row:
        return None
    return parse_report(row["raw"], "strict")


def evaluate(gateway: Gateway, instances: Sequence[EvalInstance], *, n_samples: int = 1,
             temperature: float = 0.0, top_p: float = 1.0, parse_mode: str = "lenient",
             source_lang: str = "Chinese", target_lang: str = "English",
             instruction_template: str | None = None, max_tokens: int = 1024) -> list[dict]:
    requests = [
        ChatRequest.user("evaluator",
                         build_instruction(inst.reference, inst.candidate, source_lang,
                                           target_lang, instruction_template),
                         temperature=temperature, top_p=top_p, n_samples=n_samples,
                         max_tokens=max_tokens)
        for inst in instances
    ]
    rows = []
    for inst, outputs in zip(instances, gateway.complete_many(requests)):
        for k, raw in enumerate(outputs):
            row: dict = {"instance_id": inst.instance_id, "sample_index": k, "raw": raw}
            try:
                report = parse_report(raw, parse_mode)
            except ReportError as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            else:
                row["report"] = report.to_dict()
                if report.repairs:
                    row["repairs"] = list(report.repairs)
            rows.append(row)
    return list(iter_sorted(rows))


def judge(gateway: Gateway, instances: Mapping[str, EvalInstance], rows: Iterable[dict]
          ) -> list[dict]:
    """One judge transcript per parseable sample row."""
    todo = []
    for row in iter_sorted(rows):
        report = report_of(row)
        if report is None:
            continue
        kind = prompt_kind(report)
        prompt = build_judge_prompt(kind, instances[str(row["instance_id"])], report)
        todo.append((row, kind, prompt))
    requests = [ChatRequest.user("judge", p) for _, _, p in todo]
    transcripts = []
    for (row, kind, prompt), reply in zip(todo, gateway.complete_many(requests)):
        transcripts.append({"instance_id": row["instance_id"],
                            "sample_index": row.get("sample_index", 0),
                            "kind": kind, "prompt": prompt, "response": reply[0]})
    return transcripts


def _answers(transcript: Mapping, report: DiagnosticReport):
    return parse_judge_response(transcript["kind"], transcript["response"], len(report))


def check(instances: Mapping[str, EvalInstance], rows: Iterable[dict],
          transcripts: Iterable[dict] = (), casefold: bool = False) -> list[dict]:
    """Deterministic check outcomes, one row per annotation.

    When a critique transcript exists for a sample, its Q1/Q2 answers replace
    the heuristic span and phrase-pair extraction.
    """
    by_key = {_key(t): t for t in transcripts if t.get("kind") == CRITIQUE}
    out = []
    for row in iter_sorted(rows):
        report = report_of(row)
        if report is None or not report.annotations:
            continue
        overrides = None
        t = by_key.get(_key(row))
        if t is not None:
            overrides = extractions_from_answers(_answers(t, report), report)
        outcomes = run_deterministic_checks(instances[str(row["instance_id"])], report,
                                            overrides, casefold=casefold)
        for o in outcomes:
            out.append({"instance_id": row["instance_id"],
                        "sample_index": row.get("sample_index", 0), **o.to_dict()})
    return out


def feedback(rows: Iterable[dict], checks: Iterable[dict], transcripts: Iterable[dict]
             ) -> list[dict]:
    """Instance feedback per sample row.

    Unparseable reports score 0. Samples whose judge reply cannot be read
    get an ``error`` row and no total.
    """
    outcomes: dict[tuple[str, int], list[CheckOutcome]] = {}
    for c in checks:
        outcomes.setdefault(_key(c), []).append(CheckOutcome.from_dict(c))
    by_key = {_key(t): t for t in transcripts}
    out = []
    for row in iter_sorted(rows):
        key = _key(row)
        base = {"instance_id": row["instance_id"], "sample_index": row.get("sample_index", 0)}
        report = report_of(row)
        if report is None:
            out.append({**base, "per_annotation": [], "total": "0/1",
                        "note": "unparseable report"})
            continue
        t = by_key.get(key)
        if t is None:
            out.append({**base, "error": "no judge transcript"})
            continue
        try:
            answers = _answers(t, report)
            if isinstance(answers, JudgeAnswers):
                modes = map_answers_to_failures(answers, report, outcomes.get(key, []))
                per = [score_annotation(m, a.index) for a, m in zip(report.annotations, modes)]
                inst = aggregate_instance(per, instance_id=str(row["instance_id"]))
            else:
                inst = aggregate_instance([], answers, instance_id=str(row["instance_id"]))
        except JudgeError as exc:
            out.append({**base, "error": f"{type(exc).__name__}: {exc}"})
            continue
        out.append({**base, **inst.to_dict()})
    return out


def reward_request(instance: EvalInstance, raw: str) -> ChatRequest:
    prompt = templates.load("reward").substitute(
        reference=instance.reference, candidate=instance.candidate, report=raw)
    return ChatRequest.user("reward", prompt)


_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def parse_reward(text: str) -> float:
    m = _NUMBER.search(text)
    if not m:
        raise ValueError(f"no number in reward reply {text[:60]!r}")
    return float(m.group())


def reward(gateway: Gateway, instances: Mapping[str, EvalInstance], rows: Iterable[dict]
           ) -> list[dict]:
    rows = [r for r in iter_sorted(rows) if report_of(r) is not None]
    requests = [reward_request(instances[str(r["instance_id"])], r["raw"]) for r in rows]
    out = []
    for r, reply in zip(rows, gateway.complete_many(requests)):
        out.append({"instance_id": r["instance_id"], "sample_index": r.get("sample_index", 0),
                    "reward": parse_reward(reply[0])})
    return out


def samples_from(rows: Iterable[dict], feedback_rows: Iterable[dict] = (),
                 reward_rows: Iterable[dict] = ()) -> dict[str, list[SampledOutput]]:
    fb = {_key(f): Fraction(f["total"]) for f in feedback_rows if "total" in f}
    rw = {_key(r): float(r["reward"]) for r in reward_rows}
    grouped: dict[str, list[SampledOutput]] = {}
    for row in iter_sorted(rows):
        key = _key(row)
        report = report_of(row) if ("report" in row or "raw" in row) else None
        grouped.setdefault(key[0], []).append(SampledOutput(
            key[0], key[1], report, row.get("raw", ""), fb.get(key), rw.get(key)))
    return grouped


def rerank_rows(rows: Sequence[dict], reward_rows: Iterable[dict]) -> list[dict]:
    by_key = {_key(r): r for r in rows}
    out = []
    for iid, samples in samples_from(rows, reward_rows=reward_rows).items():
        best = rerank(samples)
        out.append({**by_key[(iid, best.sample_index)], "reward": best.reward})
    return out


def run_all(gateway: Gateway, instances: Sequence[EvalInstance], *, n_samples: int = 4,
            temperature: float = 0.8, top_p: float = 0.9) -> dict[str, list[dict]]:
    """evaluate -> check -> judge -> feedback -> pairs -> reward -> rerank -> score.

    Returns every intermediate artifact keyed by stage name.
    """
    from .ranking import build_pairs
    from .scoring import score_report

    by_id = {i.instance_id: i for i in instances}
    samples = evaluate(gateway, instances, n_samples=n_samples, temperature=temperature,
                       top_p=top_p)
    checks = check(by_id, samples)
    transcripts = judge(gateway, by_id, samples)
    fb = feedback(samples, checks, transcripts)
    usable = [f for f in fb if "total" in f]
    pairs, stats = build_pairs(samples_from(usable, usable))
    rewards = reward(gateway, by_id, samples)
    best = rerank_rows(samples, rewards)
    greedy = evaluate(gateway, instances, **GREEDY)
    scores = []
    for row in greedy:
        rep = report_of(row)
        rec = {"instance_id": row["instance_id"]}
        rec.update(score_report(rep).to_dict() if rep is not None else {"error": row["error"]})
        scores.append(rec)
    return {"samples": samples, "checks": checks, "judge": transcripts, "feedback": fb,
            "pairs": [p.to_dict() for p in pairs], "pair_stats": [stats.to_dict()],
            "rewards": rewards, "reranked": best, "greedy": greedy, "scores": scores}
