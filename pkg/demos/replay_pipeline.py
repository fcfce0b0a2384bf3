"""
The whole pipeline from a cassette
==================================

evaluate -> check -> judge -> feedback -> pairs -> reward -> rerank -> score,
on ten instances, with every model response replayed from a recorded
cassette. Nothing touches the network.
"""
from collections import Counter
from pathlib import Path

from diageval.gateway import Cassette, Gateway
from diageval.pipeline import run_all
from diageval.records import read_jsonl
from diageval.report import EvalInstance

fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e"
gateway = Gateway("replay", Cassette.load(fixtures / "pipeline_cassette.jsonl"))
instances = [EvalInstance.from_dict(r) for r in read_jsonl(fixtures / "instances.jsonl")]

out = run_all(gateway, instances)
for stage, rows in out.items():
    print(f"{stage:>10}: {len(rows)} rows")

###############################################################################
# What the checks and the judge found

modes = Counter(m for c in out["checks"] for m in c["triggered"])
print("deterministic failure modes:", dict(sorted(modes.items())))
print("pair stats:", out["pair_stats"][0])

###############################################################################
# Greedy scores next to the reranked sample

best = {r["instance_id"]: r for r in out["reranked"]}
for s in out["scores"]:
    iid = s["instance_id"]
    print(f"{iid:>13}  greedy score {s['score']:>4}   best sample #{best[iid]['sample_index']}"
          f" (reward {best[iid]['reward']:.3f})")
