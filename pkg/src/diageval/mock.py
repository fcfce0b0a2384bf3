"""Deterministic offline stand-ins for the remote models.

Each class is a `gateway.Transport`: it maps a `ChatRequest` to response
texts using only the prompt and a hash of it, so recording a cassette with
these and replaying it later are both reproducible. They exist for tests,
demos and dry runs, not as evaluation models.
"""

from __future__ import annotations

import hashlib
import json
import random
import re

from .checks import extract_pairs, extract_span
from .datagen import TAXONOMY
from .gateway import ChatRequest
from .report import DiagnosticReport, ErrorAnnotation, Severity, render_report


def _rng(*key: object) -> random.Random:
    blob = "\x1f".join(str(k) for k in key).encode("utf-8")
    return random.Random(int.from_bytes(hashlib.sha256(blob).digest()[:8], "big"))


def _prompt(request: ChatRequest) -> str:
    return request.messages[-1][1]


def _words(text: str) -> list[str]:
    return re.findall(r"[\w'-]+", text)


class MockJudge:
    """Judge transport driven by a fixture table, with a rule-based fallback.

    ``table`` maps an exact prompt to its reply. Other critique prompts get a
    JSON reply built from the heuristic phrase extraction, with severity and
    yes/no answers chosen by a hash of the prompt.
    """

    def __init__(self, table: dict[str, str] | None = None):
        self.table = dict(table or {})
        self.calls = 0

    def __call__(self, request: ChatRequest) -> list[str]:
        self.calls += 1
        prompt = _prompt(request)
        reply = self.table.get(prompt)
        if reply is None:
            reply = self.rule_reply(prompt)
        return [reply] * request.n_samples

    @staticmethod
    def rule_reply(prompt: str) -> str:
        rng = _rng("judge", prompt)
        if "does the output contain any error?" in prompt:
            return "Yes" if rng.random() < 0.3 else "No"
        locations = dict(re.findall(r"^Error location (\d+): (.*)$", prompt, re.M))
        explanations = dict(re.findall(r"^Explanation (\d+): (.*)$", prompt, re.M))
        reply = {}
        for idx in sorted(locations, key=int):
            pairs = extract_pairs(explanations.get(idx, ""))
            complete = [p for p in pairs if p.complete]
            q2 = pairs[0].to_list() if pairs else [None, None]
            reply[f"Err{idx}"] = {
                "Q1": extract_span(locations[idx]),
                "Q2": ["None" if s is None else s for s in q2],
                "Q3": ("Yes" if rng.random() < 0.9 else "No") if complete else "None",
                "Q4": rng.choice(["major-error", "minor-error", "minor-error", "no-error"]),
                "Q5": "Yes" if rng.random() < 0.9 else "No",
                "Q6": "Yes" if rng.random() < 0.95 else "No",
            }
        reply["Q7"] = "Yes, 1" if rng.random() < 0.1 else "No, 0"
        return json.dumps(reply, indent=2, ensure_ascii=False)


class MockEvaluator:
    """Evaluator transport emitting plausible reports about the candidate.

    Greedy requests always get the same report; sampled requests get
    ``n_samples`` different ones.
    """

    _CANDIDATE = re.compile(r'The model generated translation is "(.*)"\. Please', re.S)
    _REFERENCE = re.compile(r'The correct translation is "(.*)"\. The model', re.S)

    def __call__(self, request: ChatRequest) -> list[str]:
        prompt = _prompt(request)
        cand = self._CANDIDATE.search(prompt)
        ref = self._REFERENCE.search(prompt)
        candidate = cand.group(1) if cand else prompt
        reference = ref.group(1) if ref else prompt
        out = []
        for k in range(request.n_samples):
            rng = _rng("evaluator", prompt, 0 if request.greedy else k)
            out.append(render_report(self._report(rng, candidate, reference)))
        return out

    @staticmethod
    def _report(rng: random.Random, candidate: str, reference: str) -> DiagnosticReport:
        cand_words = _words(candidate) or ["output"]
        ref_words = _words(reference) or ["reference"]
        anns = []
        for i in range(1, rng.randint(0, 3) + 1):
            start = rng.randrange(len(cand_words))
            span = " ".join(cand_words[start:start + rng.randint(1, 3)])
            if rng.random() < 0.15:
                span = rng.choice(ref_words)  # hallucinated location
            fix = rng.choice(ref_words)
            etype = rng.choice(TAXONOMY)
            severity = rng.choice((Severity.MAJOR, Severity.MINOR))
            expl = (f'The incorrect translation uses "{span}" instead of "{fix}", '
                    f'which {"changes" if severity is Severity.MAJOR else "does not change"} '
                    f'the meaning of the sentence.')
            anns.append(ErrorAnnotation(i, etype.report_description, severity, f'"{span}"', expl))
        return DiagnosticReport(len(anns), tuple(anns))


class MockDataModel:
    """Data-generation transport answering domain, topic, sentence and
    injection prompts in the expected reply formats."""

    _RAW = re.compile(r'The correct translation is, "(.*)"\. Your translation', re.S)

    def __call__(self, request: ChatRequest) -> list[str]:
        prompt = _prompt(request)
        return [self.reply(prompt, k) for k in range(request.n_samples)]

    def reply(self, prompt: str, k: int = 0) -> str:
        rng = _rng("datagen", prompt, k)
        m = re.match(r"Find (\d+) major domains", prompt)
        if m:
            return ",".join(f'"Domain {i}"' for i in range(1, int(m.group(1)) + 1))
        m = re.match(r"Find (\d+) topics in the (.*) domain", prompt)
        if m:
            return "\n".join(f"{i}. {m.group(2)} topic {i}" for i in range(1, int(m.group(1)) + 1))
        m = re.match(r"Give me (\d+) (\w+) sentences about (.*) \(Each", prompt)
        if m:
            return "\n".join(
                f"{i}. Sentence {i} about {m.group(3)} has {rng.randint(5, 30)} words in it."
                for i in range(1, int(m.group(1)) + 1))
        raw = self._RAW.search(prompt)
        if raw:
            return self._inject(rng, raw.group(1), prompt)
        return "I cannot help with that."

    @staticmethod
    def _inject(rng: random.Random, raw_text: str, prompt: str) -> str:
        words = raw_text.split()
        n = len(re.findall(r"^Error type \d+:", prompt, re.M))
        corrupted = list(words)
        lines = [f'Paraphrase correct translation: "{raw_text}"']
        spans = []
        if n <= len(words):
            positions = sorted(rng.sample(range(len(words)), n))
        else:
            positions = [i % len(words) for i in range(n)]
        for pos in positions:
            corrupted[pos] = words[pos][::-1] + "x"
            spans.append((words[pos], corrupted[pos]))
        lines.append(f'Incorrect Translation: "{" ".join(corrupted)}"')
        for i, (orig, bad) in enumerate(spans, start=1):
            etype = re.search(rf"^Error type {i}: (.*)$", prompt, re.M).group(1)
            sev = re.findall(r"^Major/minor: (\w+)$", prompt, re.M)[i - 1]
            lines += [f"Error type {i}: {etype}", f"Major/minor: {sev}",
                      f'Error location {i}: "{bad}"',
                      f'Explanation for error {i}: The incorrect translation uses "{bad}" '
                      f'instead of "{orig}".']
        return "\n".join(lines)


class MockReward:
    """Reward transport: fewer reported errors score higher, plus hash noise."""

    def __call__(self, request: ChatRequest) -> list[str]:
        prompt = _prompt(request)
        n_err = len(re.findall(r"^Error type \d+:", prompt, re.M))
        noise = _rng("reward", prompt).random()
        return [f"{-n_err + noise:.6f}"] * request.n_samples
