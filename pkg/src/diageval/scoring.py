"""Severity-weighted scoring of diagnostic reports."""

from __future__ import annotations

from dataclasses import dataclass

from .report import DiagnosticReport

MAJOR_WEIGHT = -5
MINOR_WEIGHT = -1


@dataclass(frozen=True)
class QualityScore:
    value: int
    n_major: int
    n_minor: int

    def to_dict(self) -> dict:
        return {"score": self.value, "n_major": self.n_major, "n_minor": self.n_minor}


def score_report(report: DiagnosticReport, major: int = MAJOR_WEIGHT,
                 minor: int = MINOR_WEIGHT, clamp: int | None = None) -> QualityScore:
    """Sum ``major`` per Major error and ``minor`` per Minor error.

    ``clamp`` optionally floors the result (e.g. ``clamp=-25``); off by default
    because inference-time reports are not capped at five errors.
    """
    if major >= 0 or minor >= 0:
        raise ValueError("severity weights must be negative")
    n_major, n_minor = report.n_major, report.n_minor
    value = major * n_major + minor * n_minor
    if clamp is not None:
        value = max(value, clamp)
    return QualityScore(value, n_major, n_minor)
