import json
import shutil

import pytest

from diageval.cli import run
from diageval.records import read_jsonl

from conftest import FIXTURES

E2E = FIXTURES / "e2e"


@pytest.fixture
def work(tmp_path):
    shutil.copy(E2E / "instances.jsonl", tmp_path / "instances.jsonl")
    return tmp_path


def ok(argv):
    assert run([str(a) for a in argv]) == 0


def replay(*argv):
    return [*argv, "--mode", "replay", "--cassette", E2E / "pipeline_cassette.jsonl"]


def test_full_chain(work):
    inst = work / "instances.jsonl"
    ok(replay("evaluate", "--instances", inst, "--out", work / "samples.jsonl",
              "--samples", 4, "--temperature", 0.8, "--top-p", 0.9))
    ok(["check", "--instances", inst, "--reports", work / "samples.jsonl",
        "--out", work / "checks.jsonl"])
    ok(replay("judge", "--instances", inst, "--reports", work / "samples.jsonl",
              "--out", work / "judge.jsonl"))
    ok(["feedback", "--reports", work / "samples.jsonl", "--checks", work / "checks.jsonl",
        "--judge", work / "judge.jsonl", "--out", work / "feedback.jsonl"])
    ok(["pairs", "--feedback", work / "feedback.jsonl", "--out", work / "pairs.jsonl",
        "--stats", work / "stats.json"])
    ok(replay("reward", "--instances", inst, "--reports", work / "samples.jsonl",
              "--out", work / "rewards.jsonl"))
    ok(["rerank", "--reports", work / "samples.jsonl", "--rewards", work / "rewards.jsonl",
        "--out", work / "best.jsonl"])
    ok(replay("evaluate", "--instances", inst, "--out", work / "greedy.jsonl"))
    ok(["score", "--in", work / "greedy.jsonl", "--out", work / "scores.jsonl"])

    stats = json.loads((work / "stats.json").read_text())
    assert stats["pairs_emitted"] + stats["ties_removed"] == 10 * 6
    assert len(read_jsonl(work / "best.jsonl")) == 10
    scores = read_jsonl(work / "scores.jsonl")
    assert all(s["score"] == -5 * s["n_major"] - s["n_minor"] for s in scores)


def test_metaeval_and_significance(work, capsys):
    ratings = work / "ratings.tsv"
    rows = ["instance_id\trating\tdomain"]
    a, b = [], []
    for i in range(30):
        rows.append(f"s{i}\t{i % 7}\t{'news' if i % 2 else 'chat'}")
        a.append(json.dumps({"instance_id": f"s{i}", "score": (i % 7) + (i % 3) * 0.1}))
        b.append(json.dumps({"instance_id": f"s{i}", "score": float(i % 5)}))
    ratings.write_text("\n".join(rows) + "\n")
    (work / "a.jsonl").write_text("\n".join(a) + "\n")
    (work / "b.jsonl").write_text("\n".join(b) + "\n")
    ok(["metaeval", "--scores", f"good={work / 'a.jsonl'}", "--scores", work / "b.jsonl",
        "--ratings", ratings, "--out", work / "report.json"])
    table = capsys.readouterr().out
    assert table.splitlines()[0].split()[:3] == ["Metric", "chat", "tau"]
    rep = json.loads((work / "report.json").read_text())
    assert rep["domains"] == ["chat", "news", "Overall"]
    assert set(rep["correlations"]) == {"good", "b"}
    ok(["significance", "--metric-a", f"good={work / 'a.jsonl'}", "--metric-b", work / "b.jsonl",
        "--ratings", ratings, "--out", work / "w.json"])
    w = json.loads((work / "w.json").read_text())
    assert w["by_domain"]["Overall"]["t"] > 0

    # a score file missing one rated segment is a validation error
    (work / "b.jsonl").write_text("\n".join(b[:-1]) + "\n")
    assert run(["metaeval", "--scores", str(work / "b.jsonl"), "--ratings", str(ratings)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["missing_scores"] == ["s29"]


def test_datagen_cli(work):
    cas = work / "dg.jsonl"
    from diageval.gateway import Cassette, Gateway
    from diageval.mock import MockDataModel
    from diageval import datagen
    gw = Gateway("record", Cassette.load(cas), {"datagen": MockDataModel()})
    domains = datagen.generate_domains(gw, count=3)
    topics = datagen.generate_topics(gw, domains, count=2)
    flat = [t for d in domains for t in topics[d]]
    sentences = datagen.generate_sentences(gw, flat, seed=0)
    datagen.synthesize(gw, [s["raw_text"] for s in sentences], seed=0)
    gw.save()
    rp = ["--mode", "replay", "--cassette", cas]
    ok(["datagen", "domains", "--count", 3, "--out", work / "d.jsonl", *rp])
    ok(["datagen", "topics", "--count", 2, "--in", work / "d.jsonl", "--out", work / "t.jsonl", *rp])
    ok(["datagen", "sentences", "--in", work / "t.jsonl", "--out", work / "s.jsonl", *rp])
    ok(["datagen", "inject", "--in", work / "s.jsonl", "--out", work / "r.jsonl",
        "--manifest", work / "m.json", *rp])
    ok(["datagen", "finetune", "--in", work / "r.jsonl", "--out", work / "ft.jsonl"])
    assert len(read_jsonl(work / "ft.jsonl")) == json.loads((work / "m.json").read_text())[
        "counts"]["records"]


def test_exit_codes(work, capsys):
    assert run(["frobnicate"]) == 2
    assert run(["score", "--in", str(work / "nope.jsonl"), "--out", str(work / "x")]) == 2
    assert run(["evaluate", "--instances", str(work / "instances.jsonl"), "--out", "x",
                "--mode", "replay", "--cassette", str(E2E / "pipeline_cassette.jsonl"),
                "--config", "cfg.json"]) == 2
    assert "ConfigError" in capsys.readouterr().err
    assert run(["evaluate", "--instances", str(work / "instances.jsonl"), "--out", "x",
                "--mode", "live"]) == 2
    # a request the cassette never saw is a validation failure, not a crash
    assert run(["evaluate", "--instances", str(work / "instances.jsonl"),
                "--out", str(work / "o.jsonl"), "--samples", "3",
                "--cassette", str(E2E / "pipeline_cassette.jsonl")]) == 1
    assert "CassetteMiss" in capsys.readouterr().err
    bad = work / "bad.jsonl"
    bad.write_text('{"instance_id": "a", "raw": "Your Translation contains 1 error:"}\n')
    ok(["score", "--in", bad, "--out", work / "s.jsonl"])
    assert read_jsonl(work / "s.jsonl")[0]["error"].startswith("CountMismatch")
    bad.write_text("{not json\n")
    assert run(["score", "--in", str(bad), "--out", str(work / "s.jsonl")]) == 1
