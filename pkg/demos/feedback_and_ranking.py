"""
From judge answers to ranking pairs
===================================

A judge model answers seven questions about each report. Its answers and the
deterministic checks decide which failure modes apply, failure modes zero
out fields, and the field scores become a feedback score per sample. Samples
of the same instance are then paired for reward-model training.
"""
import json
from fractions import Fraction

from diageval import (EvalInstance, build_judge_prompt, build_pairs, map_answers_to_failures,
                      pair_loss, parse_judge_response, parse_report, run_deterministic_checks,
                      score_annotation, aggregate_instance)
from diageval.judge import CRITIQUE, extractions_from_answers
from diageval.ranking import SampledOutput

instance = EvalInstance(
    "demo-2",
    reference="Please keep the receipt until the warranty expires.",
    candidate="Please keep the ticket until the guarantee ends.",
)
report = parse_report("""Your Translation contains 2 errors:
Error type 1: Terminology is used inconsistently
Major/minor: Major
Error location 1: "ticket"
Explanation for error 1: The output uses "ticket" instead of "receipt".
Error type 2: Translation has stylistic problems
Major/minor: Minor
Error location 2: "guarantee ends"
Explanation for error 2: The output uses "guarantee ends" instead of "warranty expires".""")

###############################################################################
# The judge prompt
# ----------------

prompt = build_judge_prompt(CRITIQUE, instance, report)
print(prompt.splitlines()[0])
print("...", len(prompt.splitlines()), "lines")

###############################################################################
# A judge reply
# -------------
# The judge thinks the second error is harmless (no-error), which is a
# global failure for that annotation.

reply = json.dumps({
    "Err1": {"Q1": "ticket", "Q2": ["ticket", "receipt"], "Q3": "Yes",
             "Q4": "major-error", "Q5": "Yes", "Q6": "Yes"},
    "Err2": {"Q1": "guarantee ends", "Q2": ["guarantee ends", "warranty expires"],
             "Q3": "Yes", "Q4": "no-error", "Q5": "Yes", "Q6": "Yes"},
    "Q7": "No, 0",
})
answers = parse_judge_response(CRITIQUE, reply, len(report))
checks = run_deterministic_checks(instance, report, extractions_from_answers(answers, report))
failures = map_answers_to_failures(answers, report, checks)
per = [score_annotation(f, a.index) for a, f in zip(report.annotations, failures)]
for fb in per:
    print(fb.annotation_index, sorted(m.value for m in fb.failures), fb.fields.to_dict(), fb.score)
total = aggregate_instance(per, instance_id=instance.instance_id).total
print("instance feedback:", total)

###############################################################################
# Ranking pairs
# -------------
# Four samples with different feedback give C(4, 2) = 6 comparisons; the tie
# between samples 1 and 3 is dropped.

samples = [SampledOutput("demo-2", k, feedback=Fraction(f))
           for k, f in enumerate(["1/2", "1", "0", "1"])]
pairs, stats = build_pairs(samples)
print(stats)
for p in pairs:
    print(f"  sample {p.winner} beats {p.loser} by {p.margin}")

###############################################################################
# Pair loss
# ---------
# The reward model is trained with -log sigmoid(r_winner - r_loser).

for margin in (-2.0, 0.0, 1.0, 5.0):
    print(f"margin {margin:+.1f}: loss {pair_loss(margin, 0.0):.6f}")
