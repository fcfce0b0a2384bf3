"""LLM judge: critique prompts, answer parsing and failure-mode mapping.

Two prompt kinds exist. ``critique`` asks seven questions about a report
that lists errors; ``no_error`` asks a single yes/no question about a report
that claims the output is error-free.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Sequence

from . import templates
from .checks import CheckOutcome, Extraction, FailureMode, PhrasePair, extract_span
from .report import DiagnosticReport, EvalInstance, Severity

CRITIQUE = "critique"
NO_ERROR = "no_error"
SEVERITY_ANSWERS = ("no-error", "minor-error", "major-error")


class JudgeError(ValueError):
    pass


class KindMismatch(JudgeError):
    pass


class UnparseableResponse(JudgeError):
    pass


class MissingAnnotationBlock(JudgeError):
    pass


class BadEnumValue(JudgeError):
    pass


class CoverageGap(JudgeError):
    pass


@dataclass(frozen=True)
class AnnotationAnswers:
    q1_span: str | None
    q2_pairs: tuple[PhrasePair, ...]
    q3_alignment_ok: bool | None
    q4_severity: str
    q5_type_consistent: bool
    q6_location_discussed: bool

    def to_dict(self) -> dict:
        return {
            "Q1": self.q1_span,
            "Q2": [p.to_list() for p in self.q2_pairs],
            "Q3": _yes_no_none(self.q3_alignment_ok),
            "Q4": self.q4_severity,
            "Q5": _yes_no_none(self.q5_type_consistent),
            "Q6": _yes_no_none(self.q6_location_discussed),
        }


@dataclass(frozen=True)
class JudgeAnswers:
    per_annotation: tuple[AnnotationAnswers, ...]
    q7_repetition: bool
    q7_pair_count: int

    def to_dict(self) -> dict:
        d: dict[str, Any] = {f"Err{i}": a.to_dict()
                             for i, a in enumerate(self.per_annotation, start=1)}
        d["Q7"] = f"{_yes_no_none(self.q7_repetition)}, {self.q7_pair_count}"
        return d


@dataclass(frozen=True)
class NoErrorVerdict:
    contains_error: bool

    def to_dict(self) -> dict:
        return {"contains_error": _yes_no_none(self.contains_error)}


def _yes_no_none(v: bool | None) -> str:
    return "None" if v is None else ("Yes" if v else "No")


# --- prompts -----------------------------------------------------------------

def _annotation_lines(report: DiagnosticReport) -> str:
    out = []
    for a in report.annotations:
        out.append(f"Error{a.index}:")
        out.append(f"Error location {a.index}: {a.location_raw}")
        out.append(f"Error type {a.index}: {a.error_type}")
        out.append(f"Explanation {a.index}: {a.explanation}")
    return "\n".join(out)


def _json_format(n: int) -> str:
    block = "{Q1: A1, Q2: A2, Q3: A3, Q4: A4, Q5: A5, Q6: A6}"
    errs = ", ".join(f"Err{i}: {block}" for i in range(1, n + 1))
    return "{" + errs + ", Q7: A7}"


def build_judge_prompt(kind: str, instance: EvalInstance, report: DiagnosticReport,
                       version: int = 1) -> str:
    n = len(report.annotations)
    if kind == CRITIQUE:
        if n == 0:
            raise KindMismatch("critique prompt needs at least one annotation")
        return templates.load("critique", version).substitute(
            reference=instance.reference,
            candidate=instance.candidate,
            annotations=_annotation_lines(report),
            json_format=_json_format(n),
        )
    if kind == NO_ERROR:
        if n != 0:
            raise KindMismatch(f"no_error prompt used for a report with {n} annotations")
        return templates.load("no_error", version).substitute(
            reference=instance.reference, candidate=instance.candidate)
    raise KindMismatch(f"unknown judge prompt kind {kind!r}")


def prompt_kind(report: DiagnosticReport) -> str:
    return CRITIQUE if report.annotations else NO_ERROR


# --- response parsing ----------------------------------------------------------

_NONE_TOKENS = {"none", "null", "n/a", ""}


def _first_json_object(raw: str) -> dict:
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", raw):
        try:
            obj, _ = decoder.raw_decode(raw, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise UnparseableResponse("no JSON object found in judge response")


def _token(value: Any) -> str:
    return str(value).strip().strip(".!\"'").strip().lower()


def _as_bool(value: Any, question: str, allow_none: bool = False) -> bool | None:
    if isinstance(value, bool):
        return value
    if value is None and allow_none:
        return None
    tok = _token(value)
    if tok in ("yes", "y", "true"):
        return True
    if tok in ("no", "n", "false"):
        return False
    if allow_none and tok in _NONE_TOKENS:
        return None
    raise BadEnumValue(f"{question}: expected Yes/No, got {value!r}")


def _side(value: Any) -> str | None:
    if value is None:
        return None
    s = str(value).strip()
    return None if s.lower() in _NONE_TOKENS else s


def _parse_pairs(value: Any) -> tuple[PhrasePair, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        s = value.strip()
        if s.lower() in _NONE_TOKENS:
            return ()
        try:
            return _parse_pairs(json.loads(s))
        except (json.JSONDecodeError, TypeError):
            pass
        if s.startswith("[") and s.endswith("]") and "," in s:
            left, right = s[1:-1].rsplit(",", 1)
            return (PhrasePair(_side(left.strip(" \"'")), _side(right.strip(" \"'"))),)
        return (PhrasePair(s, None),)
    if isinstance(value, (list, tuple)):
        if not value:
            return ()
        if all(isinstance(v, (list, tuple)) for v in value):
            out: list[PhrasePair] = []
            for v in value:
                out.extend(_parse_pairs(v))
            return tuple(out)
        if len(value) == 2:
            pair = PhrasePair(_side(value[0]), _side(value[1]))
            return () if pair.incorrect is None and pair.correct is None else (pair,)
        if len(value) == 1:
            return (PhrasePair(_side(value[0]), None),)
    raise BadEnumValue(f"Q2: cannot read phrase pairs from {value!r}")


def _parse_q7(value: Any) -> tuple[bool, int]:
    if isinstance(value, dict):
        flag = _as_bool(value.get("flag", value.get("answer")), "Q7")
        count = value.get("pair_count", value.get("count", value.get("number")))
    elif isinstance(value, (list, tuple)) and value:
        flag = _as_bool(value[0], "Q7")
        count = value[1] if len(value) > 1 else None
    else:
        parts = re.split(r"[,;\s]+", str(value).strip(), maxsplit=1)
        flag = _as_bool(parts[0], "Q7")
        count = parts[1] if len(parts) > 1 else None
    if not flag:
        return False, 0
    try:
        n = int(re.search(r"\d+", str(count)).group()) if count is not None else 1
    except AttributeError:
        raise BadEnumValue(f"Q7: bad repetition count {count!r}") from None
    return True, n


def _lookup(d: dict, *names: str) -> Any:
    lowered = {re.sub(r"[\s_]", "", str(k)).lower(): v for k, v in d.items()}
    for name in names:
        key = name.lower()
        if key in lowered:
            return lowered[key]
    raise KeyError(names[0])


def _parse_block(block: Any, i: int) -> AnnotationAnswers:
    if not isinstance(block, dict):
        raise UnparseableResponse(f"Err{i} is not an object")
    try:
        q = {k: _lookup(block, k) for k in ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6")}
    except KeyError as exc:
        raise UnparseableResponse(f"Err{i} lacks {exc.args[0]}") from None
    q4 = _token(q["Q4"]).replace(" ", "-").replace("_", "-")
    if q4 not in SEVERITY_ANSWERS:
        raise BadEnumValue(f"Err{i} Q4: expected one of {SEVERITY_ANSWERS}, got {q['Q4']!r}")
    return AnnotationAnswers(
        q1_span=_side(q["Q1"]),
        q2_pairs=_parse_pairs(q["Q2"]),
        q3_alignment_ok=_as_bool(q["Q3"], f"Err{i} Q3", allow_none=True),
        q4_severity=q4,
        q5_type_consistent=_as_bool(q["Q5"], f"Err{i} Q5"),
        q6_location_discussed=_as_bool(q["Q6"], f"Err{i} Q6"),
    )


def parse_judge_response(kind: str, raw: str, n_annotations: int = 0
                         ) -> JudgeAnswers | NoErrorVerdict:
    if kind == NO_ERROR:
        m = re.search(r"\b(yes|no)\b", raw, re.I)
        if not m:
            raise UnparseableResponse(f"expected Yes/No, got {raw[:80]!r}")
        return NoErrorVerdict(m.group(1).lower() == "yes")
    if kind != CRITIQUE:
        raise KindMismatch(f"unknown judge prompt kind {kind!r}")
    obj = _first_json_object(raw)
    blocks = []
    for i in range(1, n_annotations + 1):
        try:
            block = _lookup(obj, f"Err{i}", f"Error{i}")
        except KeyError:
            raise MissingAnnotationBlock(f"response has no Err{i} block") from None
        blocks.append(_parse_block(block, i))
    try:
        q7 = _lookup(obj, "Q7")
    except KeyError:
        raise UnparseableResponse("response has no Q7 answer") from None
    flag, count = _parse_q7(q7)
    return JudgeAnswers(tuple(blocks), flag, count)


# --- mapping to failure modes ------------------------------------------------------

def extractions_from_answers(answers: JudgeAnswers, report: DiagnosticReport
                             ) -> dict[int, Extraction]:
    """Judge Q1/Q2 answers as overrides for the deterministic checks."""
    out = {}
    for ann, ans in zip(report.annotations, answers.per_annotation):
        span = ans.q1_span if ans.q1_span else extract_span(ann.location_raw)
        out[ann.index] = Extraction(span, ans.q2_pairs)
    return out


def map_answers_to_failures(answers: JudgeAnswers, report: DiagnosticReport,
                            deterministic: Sequence[CheckOutcome]
                            ) -> list[frozenset[FailureMode]]:
    """Failure modes per annotation, in report order.

    Judge answers decide M1, M2, M5, G1, G3 and (via Q7) G2; they are unioned
    with the deterministic outcomes, never subtracted from them.
    """
    n = len(report.annotations)
    if len(answers.per_annotation) != n:
        raise CoverageGap(f"{len(answers.per_annotation)} answer blocks for {n} annotations")
    by_index = {o.annotation_index: o for o in deterministic}
    missing = [a.index for a in report.annotations if a.index not in by_index]
    if missing:
        raise CoverageGap(f"no deterministic outcome for annotations {missing}")

    result = []
    for ann, ans in zip(report.annotations, answers.per_annotation):
        modes = set(by_index[ann.index].triggered)
        if not ans.q5_type_consistent:
            modes.add(FailureMode.M1)
        if not ans.q6_location_discussed:
            modes.add(FailureMode.M2)
        if ans.q3_alignment_ok is False:
            modes.add(FailureMode.G3)
        if ans.q4_severity == "no-error":
            modes.add(FailureMode.G1)
        else:
            judged = Severity.MAJOR if ans.q4_severity == "major-error" else Severity.MINOR
            if judged is not ann.severity:
                modes.add(FailureMode.M5)
        result.append(modes)

    if answers.q7_repetition:
        lexical = any(FailureMode.G2 in by_index[a.index].triggered for a in report.annotations)
        if not lexical:
            # repetition flagged but not localizable: penalize every annotation
            for modes in result:
                modes.add(FailureMode.G2)
    return [frozenset(m) for m in result]
