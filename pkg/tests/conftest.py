import json
import unicodedata
from pathlib import Path

import pytest
from hypothesis import strategies as st

from diageval.report import DiagnosticReport, ErrorAnnotation, EvalInstance, Severity

FIXTURES = Path(__file__).parent / "fixtures"
CASE_NAMES = ("misalignment", "logic", "repetition", "multiple", "critique")


def load_case(name):
    cases = json.loads((FIXTURES / "cases.json").read_text(encoding="utf-8"))
    return EvalInstance.from_dict(cases[name])


def report_text(name, ext="txt"):
    return (FIXTURES / "reports" / f"{name}.{ext}").read_text(encoding="utf-8")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def _field_ok(s):
    return (s == s.strip() and len(s.splitlines()) == 1
            and unicodedata.normalize("NFC", s) == s)


field_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40,
).map(lambda s: unicodedata.normalize("NFC", s).strip()).filter(_field_ok)


@st.composite
def reports(draw, max_errors=6):
    n = draw(st.integers(0, max_errors))
    anns = tuple(
        ErrorAnnotation(i, draw(field_text), draw(st.sampled_from(list(Severity))),
                        draw(field_text), draw(field_text))
        for i in range(1, n + 1))
    return DiagnosticReport(n, anns)


# acceptance criteria report one line each, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
