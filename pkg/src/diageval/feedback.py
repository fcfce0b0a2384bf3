"""Field-level feedback scores in exact rational arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .checks import FailureMode
from .judge import NoErrorVerdict

# Which field each local failure mode invalidates.
LOCAL_FIELD = {
    FailureMode.M1: "type_ok",
    FailureMode.M2: "location_ok",
    FailureMode.M3: "location_ok",
    FailureMode.M4: "explanation_ok",
    FailureMode.M5: "explanation_ok",
}
N_FIELDS = 3


class EmptyInstance(ValueError):
    pass


def fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)


@dataclass(frozen=True)
class FieldScores:
    type_ok: int = 1
    location_ok: int = 1
    explanation_ok: int = 1

    @property
    def correct(self) -> int:
        return self.type_ok + self.location_ok + self.explanation_ok

    def to_dict(self) -> dict:
        return {"type": self.type_ok, "location": self.location_ok,
                "explanation": self.explanation_ok}


@dataclass(frozen=True)
class AnnotationFeedback:
    annotation_index: int
    failures: frozenset[FailureMode]
    fields: FieldScores
    score: Fraction

    def to_dict(self) -> dict:
        return {
            "annotation_index": self.annotation_index,
            "failures": sorted(m.value for m in self.failures),
            "fields": self.fields.to_dict(),
            "score": fraction_str(self.score),
        }


@dataclass(frozen=True)
class InstanceFeedback:
    instance_id: str
    per_annotation: tuple[AnnotationFeedback, ...]
    total: Fraction

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "per_annotation": [a.to_dict() for a in self.per_annotation],
            "total": fraction_str(self.total),
        }


def score_annotation(failures: Iterable[FailureMode], annotation_index: int = 1
                     ) -> AnnotationFeedback:
    failures = frozenset(FailureMode(f) for f in failures)
    if any(f.is_global for f in failures):
        fields = FieldScores(0, 0, 0)
    else:
        zeroed = {LOCAL_FIELD[f] for f in failures}
        fields = FieldScores(**{name: 0 for name in zeroed})
    return AnnotationFeedback(annotation_index, failures, fields,
                              Fraction(fields.correct, N_FIELDS))


def aggregate_instance(per_annotation: Sequence[AnnotationFeedback],
                       no_error_verdict: NoErrorVerdict | None = None,
                       instance_id: str = "") -> InstanceFeedback:
    """Mean annotation score; an empty report scores 1 iff the judge agrees
    the output has no error, else 0."""
    if per_annotation:
        total = sum((a.score for a in per_annotation), Fraction(0)) / len(per_annotation)
    elif no_error_verdict is not None:
        total = Fraction(0 if no_error_verdict.contains_error else 1)
    else:
        raise EmptyInstance(f"{instance_id or 'instance'}: no annotations and no verdict")
    return InstanceFeedback(instance_id, tuple(per_annotation), total)
