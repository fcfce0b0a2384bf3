"""Command-line entry point.

Exit codes: 0 success, 1 validation failure (JSON error on stderr),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import datagen, pipeline
from .datagen import DecodeParams, SyntheticRecord
from .gateway import Cassette, Gateway, GatewayError, HttpTransport, load_endpoints
from .judge import JudgeError
from .metaeval import JoinError, MetaEvalError, SegmentScores, meta_evaluate
from .ranking import build_pairs
from .records import read_jsonl, read_table, write_json, write_jsonl
from .report import EvalInstance, ReportError
from .scoring import score_report

log = logging.getLogger("diageval")


class ConfigError(Exception):
    pass


class ValidationError(Exception):
    def __init__(self, payload: dict):
        super().__init__(payload.get("message", ""))
        self.payload = payload


def _existing(path: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    return path


def _gateway(args) -> Gateway:
    mode = args.mode or ("replay" if args.cassette else "live")
    if mode == "replay":
        if args.config:
            raise ConfigError("replay mode does not use live endpoints; drop --config")
        if not args.cassette:
            raise ConfigError("replay mode needs --cassette")
        return Gateway("replay", Cassette.load(_existing(args.cassette)))
    if not args.config:
        raise ConfigError(f"{mode} mode needs --config with endpoint definitions")
    endpoints = load_endpoints(_existing(args.config))
    transports = {role: HttpTransport(cfg) for role, cfg in endpoints.items()}
    cassette = None
    if mode == "record":
        if not args.cassette:
            raise ConfigError("record mode needs --cassette")
        cassette = Cassette.load(args.cassette)
    return Gateway(mode, cassette, transports, max_in_flight=args.max_in_flight)


def _instances(path: str) -> dict[str, EvalInstance]:
    out = {}
    for row in read_jsonl(_existing(path)):
        inst = EvalInstance.from_dict(row)
        if inst.instance_id in out:
            raise ValidationError({"error": "DuplicateInstance", "instance_id": inst.instance_id})
        out[inst.instance_id] = inst
    return out


def _named(arg: str) -> tuple[str, str]:
    if "=" in arg:
        name, path = arg.split("=", 1)
        return name, path
    return Path(arg).stem, arg


def _load_scores(arg: str, column: str = "score") -> SegmentScores:
    name, path = _named(arg)
    scores = {}
    for row in read_table(_existing(path)):
        iid = str(row["instance_id"])
        if iid in scores:
            raise ValidationError({"error": "DuplicateInstance", "metric": name, "instance_id": iid})
        scores[iid] = float(row[column])
    return SegmentScores(name, scores)


def _load_ratings(path: str) -> tuple[dict[str, float], dict[str, str]]:
    ratings, domains = {}, {}
    for row in read_table(_existing(path)):
        iid = str(row["instance_id"])
        ratings[iid] = float(row["rating"])
        if row.get("domain"):
            domains[iid] = row["domain"]
    return ratings, domains


# --- subcommands ---------------------------------------------------------------

def cmd_score(args) -> None:
    out = []
    for row in read_jsonl(_existing(args.inp)):
        rec = {"instance_id": row["instance_id"]}
        if "sample_index" in row:
            rec["sample_index"] = row["sample_index"]
        try:
            report = pipeline.report_of(row)
        except ReportError as exc:
            report, row = None, {"error": f"{type(exc).__name__}: {exc}"}
        if report is None:
            rec["error"] = row.get("error", "unparseable report")
        else:
            rec.update(score_report(report, args.major, args.minor, args.clamp).to_dict())
        out.append(rec)
    write_jsonl(args.out, out)


def cmd_evaluate(args) -> None:
    gw = _gateway(args)
    instances = list(_instances(args.instances).values())
    rows = pipeline.evaluate(gw, instances, n_samples=args.samples,
                             temperature=args.temperature, top_p=args.top_p,
                             parse_mode=args.parse, source_lang=args.src_lang,
                             target_lang=args.tgt_lang,
                             instruction_template=_template(args.instruction_template))
    gw.save()
    write_jsonl(args.out, rows)


def cmd_judge(args) -> None:
    gw = _gateway(args)
    rows = pipeline.judge(gw, _instances(args.instances), read_jsonl(_existing(args.reports)))
    gw.save()
    write_jsonl(args.out, rows)


def cmd_check(args) -> None:
    transcripts = read_jsonl(_existing(args.judge)) if args.judge else ()
    rows = pipeline.check(_instances(args.instances), read_jsonl(_existing(args.reports)),
                          transcripts, casefold=args.casefold)
    write_jsonl(args.out, rows)


def cmd_feedback(args) -> None:
    rows = pipeline.feedback(read_jsonl(_existing(args.reports)),
                             read_jsonl(_existing(args.checks)),
                             read_jsonl(_existing(args.judge)))
    write_jsonl(args.out, rows)


def cmd_reward(args) -> None:
    gw = _gateway(args)
    rows = pipeline.reward(gw, _instances(args.instances), read_jsonl(_existing(args.reports)))
    gw.save()
    write_jsonl(args.out, rows)


def cmd_pairs(args) -> None:
    fb = read_jsonl(_existing(args.feedback))
    usable = [r for r in fb if "total" in r]
    samples = pipeline.samples_from(usable, usable)
    pairs, stats = build_pairs(samples)
    write_jsonl(args.out, (p.to_dict() for p in pairs))
    record = {**stats.to_dict(), "samples_skipped": len(fb) - len(usable)}
    if args.stats:
        write_json(args.stats, record)
    else:
        print(json.dumps(record, sort_keys=True))


def cmd_rerank(args) -> None:
    rows = pipeline.rerank_rows(read_jsonl(_existing(args.reports)),
                                read_jsonl(_existing(args.rewards)))
    write_jsonl(args.out, rows)


def _emit_report(report, args) -> None:
    if args.out:
        write_json(args.out, report.to_dict())
    table = report.render_table()
    if args.table:
        Path(args.table).write_text(table + "\n", encoding="utf-8")
    else:
        print(table)


def cmd_metaeval(args) -> None:
    ratings, domains = _load_ratings(args.ratings)
    metrics = [_load_scores(s) for s in args.scores]
    names = [m.metric_name for m in metrics]
    if len(set(names)) != len(names):
        raise ConfigError(f"metric names must be unique: {names}")
    _emit_report(meta_evaluate(metrics, ratings, domains, significance=not args.no_significance),
                 args)


def cmd_significance(args) -> None:
    ratings, domains = _load_ratings(args.ratings)
    a, b = _load_scores(args.metric_a), _load_scores(args.metric_b)
    report = meta_evaluate([a, b], ratings, domains)
    result = {"metric_a": a.metric_name, "metric_b": b.metric_name,
              "by_domain": {d: {**w.to_dict(),
                                "pearson_a": report.correlations[a.metric_name][d].pearson,
                                "pearson_b": report.correlations[b.metric_name][d].pearson}
                            for d, w in report.significance[(a.metric_name, b.metric_name)].items()}}
    if args.out:
        write_json(args.out, result)
    else:
        print(json.dumps(result, indent=2, sort_keys=True))


def _template(path: str | None) -> str | None:
    return Path(_existing(path)).read_text(encoding="utf-8") if path else None


def _decode(args) -> DecodeParams:
    return DecodeParams(temperature=args.temperature, top_p=args.top_p)


def cmd_datagen(args) -> None:
    gw = _gateway(args)
    if args.stage == "domains":
        seeds = args.seed_domains or datagen.SEED_DOMAINS
        domains = datagen.generate_domains(gw, seeds, args.count, _decode(args))
        write_jsonl(args.out, ({"domain": d} for d in domains))
    elif args.stage == "topics":
        domains = [r["domain"] for r in read_jsonl(_existing(args.inp))]
        topics = datagen.generate_topics(gw, domains, args.count, _decode(args))
        write_jsonl(args.out, ({"domain": d, "topic": t} for d in domains for t in topics[d]))
    elif args.stage == "sentences":
        topics = [r["topic"] for r in read_jsonl(_existing(args.inp))]
        rows = datagen.generate_sentences(gw, topics, args.seed, args.count, args.language,
                                          _decode(args))
        write_jsonl(args.out, rows)
    elif args.stage == "inject":
        texts = [r["raw_text"] for r in read_jsonl(_existing(args.inp))]
        records, manifest = datagen.synthesize(gw, texts, args.seed, args.src_lang,
                                               args.tgt_lang, _decode(args))
        write_jsonl(args.out, (r.to_dict() for r in records))
        if args.manifest:
            write_json(args.manifest, manifest)
    gw.save()


def cmd_finetune(args) -> None:
    tpl = _template(args.instruction_template)
    records = [SyntheticRecord.from_dict(r) for r in read_jsonl(_existing(args.inp))]
    write_jsonl(args.out, (datagen.to_finetune_record(r, tpl, args.src_lang, args.tgt_lang)
                           for r in records))


# --- parser ----------------------------------------------------------------------

def _add_gateway(p) -> None:
    p.add_argument("--mode", choices=("live", "record", "replay"),
                   help="default: replay when --cassette is given, else live")
    p.add_argument("--cassette", help="cassette JSONL for record/replay")
    p.add_argument("--config", help="JSON file with endpoint definitions per role")
    p.add_argument("--max-in-flight", type=int, default=8)


def _add_langs(p) -> None:
    p.add_argument("--src-lang", default="Chinese")
    p.add_argument("--tgt-lang", default="English")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diageval", description="Diagnostic-report evaluation for machine translation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="severity-weighted score per report")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--major", type=int, default=-5)
    p.add_argument("--minor", type=int, default=-1)
    p.add_argument("--clamp", type=int, default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="run the evaluator model on instances")
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--top-p", type=float, default=1.0)
    p.add_argument("--parse", choices=("strict", "lenient"), default="lenient")
    p.add_argument("--instruction-template")
    p.add_argument("--replay", dest="cassette", help="alias for --cassette")
    _add_langs(p)
    _add_gateway(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("judge", help="query the judge about each report")
    p.add_argument("--instances", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--out", required=True)
    _add_gateway(p)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("check", help="deterministic failure-mode checks")
    p.add_argument("--instances", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--judge", help="judge transcripts whose Q1/Q2 answers replace heuristics")
    p.add_argument("--casefold", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("feedback", help="field scores from checks and judge answers")
    p.add_argument("--reports", required=True)
    p.add_argument("--checks", required=True)
    p.add_argument("--judge", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("reward", help="score each sample with the reward model")
    p.add_argument("--instances", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--out", required=True)
    _add_gateway(p)
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("pairs", help="pairwise ranking data from feedback")
    p.add_argument("--feedback", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("rerank", help="pick the highest-reward sample per instance")
    p.add_argument("--reports", required=True)
    p.add_argument("--rewards", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("metaeval", help="Kendall tau-b / Pearson against human ratings")
    p.add_argument("--scores", action="append", required=True, metavar="[NAME=]PATH")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out")
    p.add_argument("--table")
    p.add_argument("--no-significance", action="store_true")
    p.set_defaults(func=cmd_metaeval)

    p = sub.add_parser("significance", help="Williams test between two metrics")
    p.add_argument("--metric-a", required=True, metavar="[NAME=]PATH")
    p.add_argument("--metric-b", required=True, metavar="[NAME=]PATH")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("datagen", help="synthetic data generation stages")
    stages = p.add_subparsers(dest="stage", required=True)
    for stage in ("domains", "topics", "sentences", "inject"):
        s = stages.add_parser(stage)
        if stage != "domains":
            s.add_argument("--in", dest="inp", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--temperature", type=float, default=1.0)
        s.add_argument("--top-p", type=float, default=1.0)
        _add_gateway(s)
        if stage == "domains":
            s.add_argument("--count", type=int, default=100)
            s.add_argument("--seed-domains", nargs="+")
        elif stage == "topics":
            s.add_argument("--count", type=int, default=100)
        elif stage == "sentences":
            s.add_argument("--count", type=int, default=5)
            s.add_argument("--language", default="English")
        else:
            s.add_argument("--manifest")
            _add_langs(s)
        s.set_defaults(func=cmd_datagen)
    s = stages.add_parser("finetune")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--instruction-template")
    _add_langs(s)
    s.set_defaults(func=cmd_finetune)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return 2
    except JoinError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(json.dumps(exc.payload, sort_keys=True), file=sys.stderr)
        return 1
    except (ReportError, JudgeError, MetaEvalError, GatewayError, datagen.DatagenError,
            ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
