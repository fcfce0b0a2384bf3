import pytest
from hypothesis import given, settings, strategies as st

from diageval.checks import (Extraction, FailureMode, PhrasePair, extract_pairs, extract_span,
                             lexical_repetitions, run_deterministic_checks)
from diageval.report import DiagnosticReport, ErrorAnnotation, EvalInstance, Severity, parse_report

from conftest import load_case, report_text


def modes(outcomes):
    return [sorted(m.value for m in o.triggered) for o in outcomes]


def one(location, explanation, severity=Severity.MAJOR):
    return ErrorAnnotation(1, "Incorrect translation has stylistic problems", severity,
                           location, explanation)


@pytest.mark.parametrize("raw,span", [
    ('"with air"', "with air"),
    ('"...giving enough examples..."', "giving enough examples"),
    ("“dominant”", "dominant"),
    ("plain words", "plain words"),
    ('"biosensor" instead of "biological sensor"', "biosensor"),
    ('"" then "x"', "x"),
])
def test_extract_span(raw, span):
    assert extract_span(raw) == span


@pytest.mark.parametrize("text,pairs", [
    ('changes the method from "with water" to "with air," which', [("with water", "with air")]),
    ('uses "biosensor" instead of "biological sensor," which', [("biosensor", "biological sensor")]),
    ('The correct term should be "base area" which means X, not "old district" which',
     [("old district", "base area")]),
    ('uses "said" instead of "stated" and "for example" instead of "such as", which',
     [("said", "stated"), ("for example", "such as")]),
    ('adds the word "later" which is not present', [("later", None)]),
    ("no quotes at all", []),
])
def test_extract_pairs(text, pairs):
    assert [tuple(p.to_list()) for p in extract_pairs(text)] == pairs


def test_logic_fixture_triggers_g5():
    out = run_deterministic_checks(load_case("logic"), parse_report(report_text("logic")))
    assert FailureMode.G5 in out[0].triggered
    assert "both" in out[0].evidence["G5"]


def test_multiple_fixture_triggers_g4():
    out = run_deterministic_checks(load_case("multiple"), parse_report(report_text("multiple")))
    assert modes(out) == [["G4"], []]


def test_misalignment_location_not_in_output():
    # the printed output never says "with air"
    out = run_deterministic_checks(load_case("misalignment"),
                                   parse_report(report_text("misalignment")))
    assert FailureMode.M3 in out[0].triggered
    assert all(not o.triggered for o in out[1:])


def test_location_in_output_passes_m3():
    inst = EvalInstance("x", "wash hands with water", "wash hands with air")
    r = DiagnosticReport(1, (one('"with air"', 'changes "with water" to "with air"'),))
    assert FailureMode.M3 not in run_deterministic_checks(inst, r)[0].triggered


def test_m4_incorrect_phrase_missing():
    inst = EvalInstance("x", "the big dog", "the large dog")
    r = DiagnosticReport(1, (one('"large"', 'uses "huge" instead of "big"'),))
    out = run_deterministic_checks(inst, r)[0]
    assert out.triggered == {FailureMode.M4}


def test_g5_correction_already_present():
    inst = EvalInstance("x", "the big dog", "the big dog barks")
    r = DiagnosticReport(1, (one('"big"', 'uses "small" instead of "big"'),))
    assert FailureMode.G5 in run_deterministic_checks(inst, r)[0].triggered


def test_duplicated_span_triggers_lexical_g2():
    inst = EvalInstance("x", "Can you ask them for me?", "Can you ask for me?")
    r = DiagnosticReport(2, (
        one('"Can you ask for me?"', "The request changes who asks."),
        ErrorAnnotation(2, "Problems with grammar, other than orthography", Severity.MINOR,
                        '"ask for me"', "The phrase is slightly off."),
    ))
    out = run_deterministic_checks(inst, r)
    assert all(FailureMode.G2 in o.triggered for o in out)


def test_judge_extraction_overrides_heuristic():
    inst = EvalInstance("x", "the big dog", "the large dog")
    r = DiagnosticReport(1, (one('"huge"', "vague explanation"),))
    assert FailureMode.M3 in run_deterministic_checks(inst, r)[0].triggered
    override = {1: Extraction("large", (PhrasePair("large", "big"),))}
    assert run_deterministic_checks(inst, r, override)[0].triggered == frozenset()


def test_casefold_option():
    inst = EvalInstance("x", "a", "The Big Dog")
    r = DiagnosticReport(1, (one('"big dog"', "lower case"),))
    assert FailureMode.M3 in run_deterministic_checks(inst, r)[0].triggered
    assert FailureMode.M3 not in run_deterministic_checks(inst, r, casefold=True)[0].triggered


def test_lexical_repetitions_nested_and_equal():
    ex = [Extraction("a b c"), Extraction("b"), Extraction("z"), Extraction("a b c")]
    assert lexical_repetitions(ex) == [(0, 1), (0, 3), (1, 3)]


def test_outcome_dict_round_trip():
    inst = load_case("logic")
    for o in run_deterministic_checks(inst, parse_report(report_text("logic"))):
        assert type(o).from_dict(o.to_dict()) == o


@st.composite
def verbatim_case(draw):
    candidate = draw(st.text(min_size=1, max_size=60).filter(lambda s: s.strip()))
    inst = EvalInstance("p", "reference text", candidate)
    text = inst.candidate
    i = draw(st.integers(0, len(text) - 1))
    j = draw(st.integers(i + 1, len(text)))
    span = text[i:j].strip()
    quoted = draw(st.booleans())
    return inst, span, quoted


@settings(max_examples=1000, deadline=None)
@given(verbatim_case())
def test_verbatim_location_never_triggers_m3(case):
    inst, span, quoted = case
    if not span:
        return
    loc = f'"{span}"' if quoted else span
    r = DiagnosticReport(1, (ErrorAnnotation(1, "t", Severity.MINOR, loc, "e"),))
    assert FailureMode.M3 not in run_deterministic_checks(inst, r)[0].triggered
