"""Diagnostic-report evaluation for machine translation.

Parse and score error reports, check them for defects, turn judge answers
into field-level feedback, build ranking pairs, and correlate metrics with
human ratings.
"""

from .checks import FailureMode, run_deterministic_checks
from .feedback import aggregate_instance, score_annotation
from .gateway import Cassette, ChatRequest, Gateway
from .judge import build_judge_prompt, map_answers_to_failures, parse_judge_response
from .metaeval import kendall_tau_b, meta_evaluate, pearson, williams_test
from .ranking import build_pairs, pair_loss, rerank
from .report import (DiagnosticReport, ErrorAnnotation, EvalInstance, Severity,
                     parse_report, render_report)
from .scoring import score_report

__version__ = "0.1.0"

__all__ = [
    "Cassette", "ChatRequest", "DiagnosticReport", "ErrorAnnotation", "EvalInstance",
    "FailureMode", "Gateway", "Severity", "aggregate_instance", "build_judge_prompt",
    "build_pairs", "kendall_tau_b", "map_answers_to_failures", "meta_evaluate",
    "pair_loss", "parse_judge_response", "parse_report", "pearson", "render_report",
    "rerank", "run_deterministic_checks", "score_annotation", "score_report",
    "williams_test",
]
