"""
Parsing, scoring and checking a diagnostic report
=================================================

A diagnostic report lists the errors an evaluator found in a translation.
Here we parse one, score it, and run the deterministic checks that catch a
bad report before any judge model is asked about it.
"""
from diageval import EvalInstance, parse_report, render_report, run_deterministic_checks
from diageval import score_report

###############################################################################
# A report with three annotations
# -------------------------------
# The third annotation points at text that is not in the output, and its
# explanation suggests a "fix" that is already there.

instance = EvalInstance(
    "demo-1",
    reference="The museum will reopen on Monday after a two-year renovation.",
    candidate="The museum opens again on Monday after a renovation of two years.",
)
raw = """**Your Translation contains 3 errors:**
**Error type 1:** Translation has stylistic problems
**Major/minor:** Minor
**Error location 1:** "a renovation of two years"
**Explanation for error 1:** The output uses "a renovation of two years" instead of "a two-year renovation".
**Error type 2:** Problems with grammar, other than orthography
**Major/minor:** Minor
**Error location 2:** "opens again"
**Explanation for error 2:** The tense changes from "will reopen" to "opens again".
**Error type 3:** Mistranslation
**Major/minor:** Major
**Error location 3:** "closes on Monday"
**Explanation for error 3:** The output uses "closes" instead of "Monday".
"""

report = parse_report(raw, "strict")
print(f"{len(report)} annotations, {report.n_major} major, {report.n_minor} minor")
print("score:", score_report(report).value)

###############################################################################
# Canonical form
# --------------
# Markdown emphasis is tolerated on input; rendering gives the plain form,
# and parsing that again gives back the same report.

canonical = render_report(report)
print(canonical.splitlines()[0])
assert parse_report(canonical) == report

###############################################################################
# Deterministic checks
# --------------------
# M3 flags a location that does not occur in the output, M4 an "incorrect"
# phrase that does not occur, G5 a correction that is already present.

for outcome in run_deterministic_checks(instance, report):
    modes = ", ".join(sorted(m.value for m in outcome.triggered)) or "none"
    print(f"annotation {outcome.annotation_index}: {modes}")
    for mode, why in sorted(outcome.evidence.items()):
        print(f"    {mode}: {why}")

###############################################################################
# Lenient parsing
# ---------------
# Model output is often slightly off. Lenient mode repairs what it can and
# says what it changed.

sloppy = raw.replace("contains 3 errors", "contains 4 errors").replace(
    "instead of \"a two-year renovation\".", "instead of\n\"a two-year renovation\".")
repaired = parse_report(sloppy, "lenient")
for note in repaired.repairs:
    print("repair:", note)
