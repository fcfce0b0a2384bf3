"""Synthetic training data: error recipes, injection prompts, fine-tune records.

The corpus is grown in stages (seed domains -> domains -> topics -> one
sentence per topic), then each sentence gets a random error recipe and an
injection prompt asking the data model to corrupt a paraphrase of it and
annotate every error.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import string
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import templates
from .gateway import ChatRequest, Gateway
from .report import (DiagnosticReport, ErrorAnnotation, InvariantViolation, Severity,
                     _classify, render_report)

RNG_ALGORITHM = "python-random-mt19937/sha256-derived-seeds"
MAX_ERRORS = 5

SEED_DOMAINS = ("News", "Technical", "Legal", "Medical", "Financial", "Gaming",
                "E-commerce", "Tourism and hospitality", "Marketing and advertising",
                "Scientific")


class DatagenError(ValueError):
    pass


class ScaffoldMismatch(DatagenError):
    pass


class CountMismatch(DatagenError):
    pass


@dataclass(frozen=True)
class ErrorType:
    category: str
    name: str
    description: str

    @property
    def prompt_description(self) -> str:
        """Wording used in injection prompts: compares to the correct translation."""
        return self.description.rstrip(".").replace("the source", "the correct translation")

    @property
    def report_description(self) -> str:
        """Wording used as the error type of a diagnostic report."""
        text = self.prompt_description
        if text.startswith("Translation "):
            text = "Incorrect translation " + text[len("Translation "):]
        return text


TAXONOMY: tuple[ErrorType, ...] = (
    ErrorType("Accuracy", "Addition", "Translation includes information not present in the source."),
    ErrorType("Accuracy", "Omission", "Translation is missing content from the source."),
    ErrorType("Accuracy", "Mistranslation", "Translation does not accurately represent the source."),
    ErrorType("Accuracy", "Untranslated text", "Source text has been left untranslated."),
    ErrorType("Fluency", "Spelling", "Incorrect spelling or capitalization."),
    ErrorType("Fluency", "Grammar", "Problems with grammar, other than orthography."),
    ErrorType("Fluency", "Register",
              "Wrong grammatical register (eg, inappropriately informal pronouns)."),
    ErrorType("Fluency", "Inconsistency", "Internal inconsistency (not related to terminology)."),
    ErrorType("Fluency", "Character encoding", "Characters are garbled due to incorrect encoding."),
    ErrorType("Terminology", "Inappropriate for context",
              "Terminology is non-standard or does not fit the context."),
    ErrorType("Terminology", "Inconsistent use", "Terminology is used inconsistently."),
    ErrorType("Style", "Awkward", "Translation has stylistic problems."),
    ErrorType("Locale convention", "Address format", "Wrong format for addresses."),
    ErrorType("Locale convention", "Currency format", "Wrong format for currency."),
    ErrorType("Locale convention", "Date format", "Wrong format for dates."),
    ErrorType("Locale convention", "Name format", "Wrong format for names."),
    ErrorType("Locale convention", "Telephone format", "Wrong format for telephone numbers."),
    ErrorType("Locale convention", "Time format", "Wrong format for time expressions."),
)

_NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five")


def derive_seed(seed: int, *key: object) -> int:
    """Stable per-item seed, independent of platform and hash randomization."""
    blob = ":".join(str(k) for k in (seed, *key)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


@dataclass(frozen=True)
class ErrorRecipe:
    errors: tuple[tuple[ErrorType, Severity], ...]

    def __post_init__(self):
        if not 1 <= len(self.errors) <= MAX_ERRORS:
            raise ValueError(f"a recipe holds 1..{MAX_ERRORS} errors, got {len(self.errors)}")
        for t, _ in self.errors:
            if t not in TAXONOMY:
                raise ValueError(f"{t} is not in the error taxonomy")

    @property
    def n_errors(self) -> int:
        return len(self.errors)

    @property
    def n_major(self) -> int:
        return sum(s is Severity.MAJOR for _, s in self.errors)

    @property
    def n_minor(self) -> int:
        return sum(s is Severity.MINOR for _, s in self.errors)

    def to_dict(self) -> dict:
        return {"errors": [{"type": t.name, "severity": s.value} for t, s in self.errors]}

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorRecipe":
        by_name = {t.name: t for t in TAXONOMY}
        return cls(tuple((by_name[e["type"]], Severity.parse(e["severity"]))
                         for e in d["errors"]))


def sample_error_recipe(rng_seed: int | random.Random) -> ErrorRecipe:
    rng = rng_seed if isinstance(rng_seed, random.Random) else random.Random(rng_seed)
    n = rng.randint(1, MAX_ERRORS)
    return ErrorRecipe(tuple((rng.choice(TAXONOMY), rng.choice((Severity.MAJOR, Severity.MINOR)))
                             for _ in range(n)))


# --- prompts -------------------------------------------------------------------

def _oxford(items: Sequence[str]) -> str:
    if len(items) <= 1:
        return "".join(items)
    return ", ".join(items[:-1]) + ", and " + items[-1]


def build_domains_prompt(seed_domains: Sequence[str] = SEED_DOMAINS, count: int = 100) -> str:
    return templates.load("domains").substitute(count=count, seed_domains=_oxford(seed_domains))


def build_topics_prompt(domain: str, count: int = 100) -> str:
    return templates.load("topics").substitute(count=count, domain=domain)


def build_sentences_prompt(topic: str, count: int = 5, language: str = "English") -> str:
    return templates.load("sentences").substitute(count=count, topic=topic, language=language)


def build_injection_prompt(raw_text: str, recipe: ErrorRecipe, source_lang: str = "Chinese",
                           target_lang: str = "English") -> str:
    if not raw_text.strip():
        raise ValueError("raw_text is empty")
    slots = []
    for i, (etype, severity) in enumerate(recipe.errors, start=1):
        slots += [f"Error type {i}: {etype.prompt_description}",
                  f"Major/minor: {severity.value}",
                  f"Error location {i}:",
                  f"Explanation for error {i}:"]
    return templates.load("injection").substitute(
        source_lang=source_lang, target_lang=target_lang, raw_text=raw_text.strip(),
        count_word=_NUMBER_WORDS[recipe.n_errors],
        n_minor=recipe.n_minor, n_major=recipe.n_major,
        error_slots="\n".join(slots),
    )


# --- response parsing --------------------------------------------------------------

def parse_domains(raw: str) -> list[str]:
    items = re.findall(r"\"([^\"]+)\"", raw)
    if not items:
        items = re.split(r"[,\n]", raw)
    return _dedupe(i.strip() for i in items)


def parse_numbered_list(raw: str, strip_period: bool = False) -> list[str]:
    items = []
    for m in re.finditer(r"^\s*\d+[.)]\s*(.+?)\s*$", raw, re.M):
        item = m.group(1)
        if strip_period:
            item = item.rstrip(".")
        items.append(item)
    return _dedupe(items)


def _dedupe(items: Iterable[str]) -> list[str]:
    seen, out = set(), []
    for i in items:
        if i and i not in seen:
            seen.add(i)
            out.append(i)
    return out


@dataclass(frozen=True)
class SyntheticRecord:
    raw_text: str
    pseudo_reference: str
    candidate: str
    report: DiagnosticReport

    def to_dict(self) -> dict:
        return {"raw_text": self.raw_text, "pseudo_reference": self.pseudo_reference,
                "candidate": self.candidate, "report": self.report.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticRecord":
        return cls(d["raw_text"], d["pseudo_reference"], d["candidate"],
                   DiagnosticReport.from_dict(d["report"]))


_PARAPHRASE = re.compile(r"^\W*paraphrase(?:d)? correct translation\s*:(.*)$", re.I)
_INCORRECT = re.compile(r"^\W*incorrect translation\s*:(.*)$", re.I)


def _unquote(s: str) -> str:
    s = s.strip()
    for a, b in (('"', '"'), ("“", "”"), ("'", "'")):
        if len(s) >= 2 and s.startswith(a) and s.endswith(b):
            return s[1:-1].strip()
    return s


def parse_injection_response(raw: str, recipe: ErrorRecipe, raw_text: str = ""
                             ) -> SyntheticRecord:
    """Pull the paraphrase, the corrupted sentence and each error's location
    and explanation out of the data model's reply.

    Error types and severities come from ``recipe``, not from the reply.
    """
    lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
    paraphrase = candidate = None
    blocks: dict[int, dict[str, str]] = {}
    for k, line in enumerate(lines):
        for pattern, name in ((_PARAPHRASE, "paraphrase"), (_INCORRECT, "candidate")):
            m = pattern.match(line)
            if m:
                value = m.group(1).strip()
                if not value and k + 1 < len(lines) and _classify(lines[k + 1])[0] is None:
                    value = lines[k + 1]
                if name == "paraphrase":
                    paraphrase = _unquote(value)
                else:
                    candidate = _unquote(value)
                break
        else:
            kind, idx, value = _classify(line)
            if kind == "type":
                blocks.setdefault(idx, {})
            elif kind in ("location", "explanation"):
                blocks.setdefault(idx, {})[kind] = value
    if not paraphrase:
        raise ScaffoldMismatch("reply has no 'Paraphrase correct translation:' line")
    if not candidate:
        raise ScaffoldMismatch("reply has no 'Incorrect Translation:' line")
    if len(blocks) != recipe.n_errors:
        raise CountMismatch(f"reply annotates {len(blocks)} errors, recipe asks "
                            f"for {recipe.n_errors}")
    annotations = []
    for i, (etype, severity) in enumerate(recipe.errors, start=1):
        block = blocks.get(i)
        if not block or not block.get("location") or not block.get("explanation"):
            raise ScaffoldMismatch(f"error {i} lacks a location or explanation")
        annotations.append(ErrorAnnotation(i, etype.report_description, severity,
                                           block["location"], block["explanation"]))
    report = DiagnosticReport(len(annotations), tuple(annotations))
    try:
        report.validate()
    except InvariantViolation as exc:
        raise ScaffoldMismatch(str(exc)) from exc
    return SyntheticRecord(raw_text, paraphrase, candidate, report)


def build_instruction(reference: str, candidate: str, source_lang: str = "Chinese",
                      target_lang: str = "English", template: str | None = None) -> str:
    tpl = templates.load("instruction") if template is None else string.Template(template)
    return tpl.substitute(reference=reference, candidate=candidate,
                          source_lang=source_lang, target_lang=target_lang)


def to_finetune_record(record: SyntheticRecord, instruction_template: str | None = None,
                       source_lang: str = "Chinese", target_lang: str = "English") -> dict:
    return {
        "input": build_instruction(record.pseudo_reference, record.candidate,
                                   source_lang, target_lang, instruction_template),
        "target": render_report(record.report),
    }


# --- pipeline stages ---------------------------------------------------------------

@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 2048


def generate_domains(gateway: Gateway, seed_domains: Sequence[str] = SEED_DOMAINS,
                     count: int = 100, decode: DecodeParams = DecodeParams()) -> list[str]:
    req = ChatRequest.user("datagen", build_domains_prompt(seed_domains, count), **decode.__dict__)
    return parse_domains(gateway.complete(req)[0])[:count]


def generate_topics(gateway: Gateway, domains: Sequence[str], count: int = 100,
                    decode: DecodeParams = DecodeParams()) -> dict[str, list[str]]:
    reqs = [ChatRequest.user("datagen", build_topics_prompt(d, count), **decode.__dict__)
            for d in domains]
    replies = gateway.complete_many(reqs)
    return {d: parse_numbered_list(r[0], strip_period=True)[:count]
            for d, r in zip(domains, replies)}


def generate_sentences(gateway: Gateway, topics: Sequence[str], seed: int, count: int = 5,
                       language: str = "English", decode: DecodeParams = DecodeParams()
                       ) -> list[dict]:
    """One randomly chosen sentence per topic, out of ``count`` candidates."""
    reqs = [ChatRequest.user("datagen", build_sentences_prompt(t, count, language),
                             **decode.__dict__) for t in topics]
    out = []
    for topic, reply in zip(topics, gateway.complete_many(reqs)):
        candidates = parse_numbered_list(reply[0])
        if not candidates:
            continue
        rng = random.Random(derive_seed(seed, "sentence", topic))
        out.append({"topic": topic, "raw_text": rng.choice(candidates),
                    "n_candidates": len(candidates)})
    return out


def synthesize(gateway: Gateway, raw_texts: Sequence[str], seed: int,
               source_lang: str = "Chinese", target_lang: str = "English",
               decode: DecodeParams = DecodeParams()
               ) -> tuple[list[SyntheticRecord], dict]:
    """Inject errors into every raw text; returns records and a manifest.

    Replies that fail scaffold validation are dropped and counted.
    """
    recipes = [sample_error_recipe(derive_seed(seed, "recipe", i))
               for i in range(len(raw_texts))]
    reqs = [ChatRequest.user("datagen", build_injection_prompt(t, r, source_lang, target_lang),
                             **decode.__dict__) for t, r in zip(raw_texts, recipes)]
    records, rejected = [], []
    for i, (text, recipe, reply) in enumerate(zip(raw_texts, recipes,
                                                  gateway.complete_many(reqs))):
        try:
            records.append(parse_injection_response(reply[0], recipe, text))
        except DatagenError as exc:
            rejected.append({"index": i, "error": type(exc).__name__, "detail": str(exc)})
    manifest = {
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "templates": [templates.template_id("injection")],
        "source_lang": source_lang,
        "target_lang": target_lang,
        "counts": {"raw_texts": len(raw_texts), "records": len(records),
                   "rejected": len(rejected)},
        "rejected": rejected,
    }
    return records, manifest


def dumps_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows)
