"""Diagnostic report data model and its canonical text grammar.

A report is the structured output of the evaluator model::

    Your Translation contains 2 errors:
    Error type 1: Incorrect translation is missing content from the correct translation
    Major/minor: Major
    Error location 1: "and its target is chemical elements"
    Explanation for error 1: ...
    Error type 2: ...

`parse_report` reads that form (strictly, or leniently with recorded repairs)
and `render_report` writes it back out byte-for-byte canonically.
"""

from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Any


class ReportError(ValueError):
    """Base class for report grammar and invariant errors."""


class MissingHeader(ReportError):
    pass


class CountMismatch(ReportError):
    pass


class MalformedBlock(ReportError):
    pass


class BadSeverity(ReportError):
    pass


class InvariantViolation(ReportError):
    pass


class Severity(str, enum.Enum):
    MAJOR = "Major"
    MINOR = "Minor"

    @classmethod
    def parse(cls, token: str) -> "Severity":
        cleaned = token.strip().strip("*_").strip().lower()
        if cleaned == "major":
            return cls.MAJOR
        if cleaned == "minor":
            return cls.MINOR
        raise BadSeverity(f"severity must be major or minor, got {token!r}")


@dataclass(frozen=True)
class ErrorAnnotation:
    index: int
    error_type: str
    severity: Severity
    location_raw: str
    explanation: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "error_type": self.error_type,
            "severity": self.severity.value,
            "location_raw": self.location_raw,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ErrorAnnotation":
        return cls(
            index=int(d["index"]),
            error_type=d["error_type"],
            severity=Severity.parse(d["severity"]),
            location_raw=d["location_raw"],
            explanation=d["explanation"],
        )


@dataclass(frozen=True)
class DiagnosticReport:
    """Parsed diagnostic report.

    ``repairs`` lists what lenient parsing had to fix; it does not take part
    in equality so a repaired report compares equal to its canonical twin.
    """

    declared_count: int
    annotations: tuple[ErrorAnnotation, ...] = ()
    repairs: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        # accept lists from callers, store tuples
        object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(self, "repairs", tuple(self.repairs))

    def __len__(self) -> int:
        return len(self.annotations)

    @property
    def n_major(self) -> int:
        return sum(a.severity is Severity.MAJOR for a in self.annotations)

    @property
    def n_minor(self) -> int:
        return sum(a.severity is Severity.MINOR for a in self.annotations)

    def validate(self) -> None:
        """Raise `InvariantViolation` unless the report is strict-valid."""
        if self.declared_count < 0:
            raise InvariantViolation("declared_count must be non-negative")
        if self.declared_count != len(self.annotations):
            raise InvariantViolation(
                f"declared_count {self.declared_count} != "
                f"{len(self.annotations)} annotations")
        for i, ann in enumerate(self.annotations, start=1):
            if ann.index != i:
                raise InvariantViolation(f"annotation {i} has index {ann.index}")
            if not isinstance(ann.severity, Severity):
                raise InvariantViolation(f"annotation {i} has no Severity")
            for name in ("error_type", "location_raw", "explanation"):
                value = getattr(ann, name)
                if not value:
                    raise InvariantViolation(f"annotation {i}: empty {name}")
                if value != value.strip() or len(value.splitlines()) != 1:
                    raise InvariantViolation(
                        f"annotation {i}: {name} must be a trimmed single line")
                if unicodedata.normalize("NFC", value) != value:
                    raise InvariantViolation(f"annotation {i}: {name} is not NFC")

    def to_dict(self) -> dict[str, Any]:
        return {
            "declared_count": self.declared_count,
            "annotations": [a.to_dict() for a in self.annotations],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DiagnosticReport":
        return cls(
            declared_count=int(d["declared_count"]),
            annotations=tuple(ErrorAnnotation.from_dict(a) for a in d["annotations"]),
        )


@dataclass(frozen=True)
class EvalInstance:
    instance_id: str
    reference: str
    candidate: str
    source: str | None = None

    def __post_init__(self):
        if not self.reference or not self.candidate:
            raise ValueError(f"{self.instance_id}: reference and candidate must be non-empty")
        object.__setattr__(self, "reference", unicodedata.normalize("NFC", self.reference))
        object.__setattr__(self, "candidate", unicodedata.normalize("NFC", self.candidate))

    def to_dict(self) -> dict[str, Any]:
        d = {"instance_id": self.instance_id, "reference": self.reference,
             "candidate": self.candidate}
        if self.source is not None:
            d["source"] = self.source
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvalInstance":
        return cls(str(d["instance_id"]), d["reference"], d["candidate"], d.get("source"))


# --- grammar -----------------------------------------------------------------

_HEADER = re.compile(r"^[*_]*\s*your translation contains\s+(\d+|no)\s+errors?\s*:?\s*[*_]*$",
                     re.IGNORECASE)
_LABELS = {
    "type": re.compile(r"^(?P<pre>[*_]*)\s*error type\s*(?P<idx>\d+)\s*:(?P<rest>.*)$", re.I),
    "severity": re.compile(r"^(?P<pre>[*_]*)\s*major\s*/\s*minor\s*:(?P<rest>.*)$", re.I),
    "location": re.compile(r"^(?P<pre>[*_]*)\s*error location\s*(?P<idx>\d+)\s*:(?P<rest>.*)$",
                           re.I),
    "explanation": re.compile(
        r"^(?P<pre>[*_]*)\s*explanation for error\s*(?P<idx>\d+)\s*:(?P<rest>.*)$", re.I),
}
_FIELD_ORDER = ("type", "severity", "location", "explanation")


def _unwrap(pre: str, rest: str) -> str:
    # "**Error type 1:** text" or "**Error type 1: text**"
    if pre:
        n = len(pre)
        if rest.startswith(pre):
            rest = rest[n:]
        elif rest.rstrip().endswith(pre):
            rest = rest.rstrip()[:-n]
    return rest.strip()


def _classify(line: str):
    for kind, pattern in _LABELS.items():
        m = pattern.match(line)
        if m:
            idx = m.groupdict().get("idx")
            return kind, (int(idx) if idx is not None else None), _unwrap(m["pre"], m["rest"])
    return None, None, line


def parse_report(text: str, mode: str = "strict") -> DiagnosticReport:
    """Parse raw report text.

    ``mode="strict"`` enforces every invariant; ``mode="lenient"`` renumbers
    indices, fixes the declared count, folds stray lines into the previous
    field and tolerates a missing location, recording each fix in
    ``report.repairs``.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    strict = mode == "strict"
    text = unicodedata.normalize("NFC", text)
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and ln.strip("*_")]
    if not lines:
        raise MissingHeader("empty report")
    m = _HEADER.match(lines[0])
    if not m:
        raise MissingHeader(f"expected 'Your Translation contains N errors', got {lines[0]!r}")
    declared = 0 if m.group(1).lower() == "no" else int(m.group(1))

    repairs: list[str] = []
    blocks: list[dict] = []
    last_field: tuple[dict, str] | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        kind, idx, value = _classify(line)
        if kind is None:
            if strict or last_field is None:
                if strict:
                    raise MalformedBlock(f"line {lineno}: unexpected text {line!r}")
                repairs.append(f"line {lineno}: dropped stray text before first block")
                continue
            block, name = last_field
            block[name] = (block[name] + " " + value).strip()
            repairs.append(f"line {lineno}: folded continuation into {name}")
            continue
        if kind == "type":
            block = {"type": value, "_idx": idx}
            blocks.append(block)
            last_field = (block, "type")
            continue
        if not blocks:
            raise MalformedBlock(f"line {lineno}: {kind} field before any 'Error type' line")
        block = blocks[-1]
        if kind in block:
            raise MalformedBlock(f"line {lineno}: duplicated {kind} field in block {len(blocks)}")
        expected = _FIELD_ORDER[_FIELD_ORDER.index(kind) - 1]
        if expected not in block:
            if not (not strict and kind == "explanation" and expected == "location"
                    and "severity" in block):
                raise MalformedBlock(
                    f"line {lineno}: {kind} field out of order in block {len(blocks)}")
        if idx is not None and idx != block["_idx"]:
            if strict:
                raise MalformedBlock(
                    f"line {lineno}: {kind} index {idx} != error type index {block['_idx']}")
            repairs.append(f"line {lineno}: {kind} index {idx} -> {block['_idx']}")
        block[kind] = value
        last_field = (block, kind)

    annotations = []
    for pos, block in enumerate(blocks, start=1):
        for name in _FIELD_ORDER:
            if name in block:
                continue
            if name == "location" and not strict:
                block[name] = ""
                repairs.append(f"block {pos}: missing location")
                continue
            raise MalformedBlock(f"block {pos}: missing {name} field")
        if not block["type"] or not block["explanation"]:
            raise MalformedBlock(f"block {pos}: empty error type or explanation")
        if strict and not block["location"]:
            raise MalformedBlock(f"block {pos}: empty error location")
        if block["_idx"] != pos:
            if strict:
                raise MalformedBlock(f"block {pos} is numbered {block['_idx']}")
            repairs.append(f"block {pos}: renumbered from {block['_idx']}")
        annotations.append(ErrorAnnotation(
            index=pos,
            error_type=block["type"],
            severity=Severity.parse(block["severity"]),
            location_raw=block["location"],
            explanation=block["explanation"],
        ))

    if declared != len(annotations):
        if strict:
            raise CountMismatch(f"header declares {declared} errors, found {len(annotations)}")
        repairs.append(f"declared count {declared} -> {len(annotations)}")
        declared = len(annotations)
    return DiagnosticReport(declared, tuple(annotations), tuple(repairs))


def render_header(n: int) -> str:
    if n == 0:
        return "Your Translation contains 0 errors"
    return f"Your Translation contains {n} error{'s' if n != 1 else ''}:"


def render_report(report: DiagnosticReport) -> str:
    """Canonical text of a strict-valid report (no trailing newline)."""
    report.validate()
    out = [render_header(len(report.annotations))]
    for a in report.annotations:
        out.append(f"Error type {a.index}: {a.error_type}")
        out.append(f"Major/minor: {a.severity.value}")
        out.append(f"Error location {a.index}: {a.location_raw}")
        out.append(f"Explanation for error {a.index}: {a.explanation}")
    return "\n".join(out)
