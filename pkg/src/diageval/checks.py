"""Failure-mode checks that need no LLM.

Covers location hallucination (M3), explanation hallucination (M4), multiple
errors in one annotation (G4), illogical corrections (G5) and lexical
repetition between annotations (G2).
"""

from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .report import DiagnosticReport, ErrorAnnotation, EvalInstance


class FailureMode(str, enum.Enum):
    M1 = "M1"  # error type inconsistent with explanation
    M2 = "M2"  # location inconsistent with explanation
    M3 = "M3"  # location not in output
    M4 = "M4"  # explanation phrase not in output
    M5 = "M5"  # major/minor disagreement
    G1 = "G1"  # not an error
    G2 = "G2"  # repetition
    G3 = "G3"  # phrase misalignment
    G4 = "G4"  # multiple errors in one annotation
    G5 = "G5"  # illogical explanation

    @property
    def is_global(self) -> bool:
        return self.value.startswith("G")


LOCAL_MODES = frozenset(m for m in FailureMode if not m.is_global)
GLOBAL_MODES = frozenset(m for m in FailureMode if m.is_global)
DETERMINISTIC_MODES = frozenset({FailureMode.M3, FailureMode.M4, FailureMode.G2,
                                 FailureMode.G4, FailureMode.G5})


@dataclass(frozen=True)
class PhrasePair:
    incorrect: str | None
    correct: str | None

    @property
    def complete(self) -> bool:
        return bool(self.incorrect) and bool(self.correct)

    def to_list(self) -> list:
        return [self.incorrect, self.correct]


@dataclass(frozen=True)
class Extraction:
    """Error span and phrase pairs for one annotation."""
    span: str
    pairs: tuple[PhrasePair, ...] = ()


@dataclass(frozen=True)
class CheckOutcome:
    annotation_index: int
    triggered: frozenset[FailureMode] = frozenset()
    evidence: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "annotation_index": self.annotation_index,
            "triggered": sorted(m.value for m in self.triggered),
            "evidence": dict(sorted(self.evidence.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckOutcome":
        return cls(int(d["annotation_index"]),
                   frozenset(FailureMode(m) for m in d["triggered"]),
                   dict(d.get("evidence", {})))


# straight and curly double quotes
_QUOTED = re.compile(r"\"([^\"]*)\"|“([^”]*)”")
_ELLIPSIS = re.compile(r"^(?:\.\.\.|…)+|(?:\.\.\.|…)+$")
_INSTEAD = re.compile(r"\binstead\b|\brather than\b|\bin place of\b", re.I)
_FROM_TO = (re.compile(r"\bfrom\s*$", re.I), re.compile(r"^\s*to\s*$", re.I))
_USES = re.compile(r"\b(?:uses?|using|used)\s*$", re.I)
_SHOULD_BE = (re.compile(r"\bshould be\s*$", re.I), re.compile(r"\bnot\s*$", re.I))


def _quoted_spans(text: str) -> list[tuple[int, int, str]]:
    spans = []
    for m in _QUOTED.finditer(text):
        body = m.group(1) if m.group(1) is not None else m.group(2)
        spans.append((m.start(), m.end(), body))
    return spans


def _phrase(body: str) -> str:
    # commas and periods sit inside the closing quote in American usage
    return body.strip().rstrip(",.").strip()


def extract_span(location_raw: str) -> str:
    """First quoted substring of the location field, else the trimmed field.

    Leading/trailing ellipses (``"...giving enough examples..."``) mark a
    fragment and are dropped.
    """
    bodies = [b for _, _, b in _quoted_spans(location_raw) if b.strip()]
    if bodies:
        span = bodies[0].strip()
    else:
        span = location_raw.strip()
        if len(span) > 2 and span[0] + span[-1] in ('""', "“”") and span[1:-1].strip():
            span = span[1:-1].strip()
    stripped = _ELLIPSIS.sub("", span).strip()
    return stripped or span


def extract_pairs(explanation: str) -> list[PhrasePair]:
    spans = _quoted_spans(explanation)
    pairs = []
    i = 0
    while i < len(spans):
        if i + 1 < len(spans):
            s0, e0, x = spans[i]
            s1, _, y = spans[i + 1]
            before = explanation[spans[i - 1][1] if i else 0:s0]
            between = explanation[e0:s1]
            pair = None
            if _FROM_TO[0].search(before) and _FROM_TO[1].match(between):
                pair = PhrasePair(_phrase(x), _phrase(y))
            elif _INSTEAD.search(between):
                pair = PhrasePair(_phrase(x), _phrase(y))
            elif _SHOULD_BE[0].search(before) and _SHOULD_BE[1].search(between):
                pair = PhrasePair(_phrase(y), _phrase(x))
            elif _USES.search(before) and len(between.split()) <= 6:
                pair = PhrasePair(_phrase(x), _phrase(y))
            if pair is not None:
                pairs.append(pair)
                i += 2
                continue
        i += 1
    if not pairs and spans:
        pairs.append(PhrasePair(_phrase(spans[0][2]), None))
    return pairs


def extract_phrase_pairs(annotation: ErrorAnnotation) -> Extraction:
    """Heuristic stand-in for the judge's Q1/Q2 extraction."""
    return Extraction(extract_span(annotation.location_raw),
                      tuple(extract_pairs(annotation.explanation)))


def run_deterministic_checks(
    instance: EvalInstance,
    report: DiagnosticReport,
    judge_pairs: Mapping[int, Extraction] | None = None,
    casefold: bool = False,
) -> list[CheckOutcome]:
    """Decide M3, M4, G4, G5 and lexical G2 for every annotation.

    ``judge_pairs`` maps annotation index to an `Extraction` taken from the
    judge's answers; it replaces the heuristic extraction for that index.
    """
    judge_pairs = judge_pairs or {}

    def norm(s: str) -> str:
        s = unicodedata.normalize("NFC", s)
        return s.casefold() if casefold else s

    candidate = norm(instance.candidate)
    extractions = [judge_pairs.get(a.index) or extract_phrase_pairs(a)
                   for a in report.annotations]
    triggered: list[set[FailureMode]] = [set() for _ in extractions]
    evidence: list[dict[str, str]] = [{} for _ in extractions]

    for k, ext in enumerate(extractions):
        span = norm(ext.span)
        if not span or span not in candidate:
            triggered[k].add(FailureMode.M3)
            evidence[k]["M3"] = f"span {ext.span!r} not found in output"
        for pair in ext.pairs:
            if pair.incorrect and norm(pair.incorrect) not in candidate:
                triggered[k].add(FailureMode.M4)
                evidence[k]["M4"] = f"phrase {pair.incorrect!r} not found in output"
        complete = [p for p in ext.pairs if p.complete]
        if len(complete) > 1:
            triggered[k].add(FailureMode.G4)
            evidence[k]["G4"] = f"{len(complete)} phrase pairs in one annotation"
        for pair in complete:
            wrong, right = norm(pair.incorrect.strip()), norm(pair.correct.strip())
            if wrong == right:
                triggered[k].add(FailureMode.G5)
                evidence[k]["G5"] = f"incorrect and correct phrase are both {pair.correct!r}"
            elif right in candidate and wrong not in candidate:
                triggered[k].add(FailureMode.G5)
                evidence[k]["G5"] = f"correction {pair.correct!r} already in output"

    for i, j in lexical_repetitions(extractions, norm):
        for a, b in ((i, j), (j, i)):
            triggered[a].add(FailureMode.G2)
            note = evidence[a].get("G2", "overlaps annotation")
            evidence[a]["G2"] = f"{note} {report.annotations[b].index}"

    return [CheckOutcome(a.index, frozenset(t), e)
            for a, t, e in zip(report.annotations, triggered, evidence)]


def lexical_repetitions(extractions: Sequence[Extraction], norm=lambda s: s
                        ) -> list[tuple[int, int]]:
    """Position pairs (i < j) whose spans are equal or nested."""
    spans = [norm(e.span.strip()) for e in extractions]
    out = []
    for i in range(len(spans)):
        for j in range(i + 1, len(spans)):
            a, b = spans[i], spans[j]
            if a and b and (a in b or b in a):
                out.append((i, j))
    return out
