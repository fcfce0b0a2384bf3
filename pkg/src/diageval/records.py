"""JSONL / TSV reading and writing shared by the pipeline stages."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Iterable, Iterator


def read_jsonl(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return rows


def dumps(row: dict) -> str:
    return json.dumps(row, ensure_ascii=False, sort_keys=True)


def write_jsonl(path: str | os.PathLike, rows: Iterable[dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(dumps(row) + "\n")
            n += 1
    return n


def write_json(path: str | os.PathLike, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, ensure_ascii=False, sort_keys=True, indent=2)
        f.write("\n")


def read_table(path: str | os.PathLike) -> list[dict]:
    """Rows of a ``.tsv`` file (header line required) or a JSONL file."""
    if str(path).endswith((".tsv", ".tab")):
        with open(path, encoding="utf-8", newline="") as f:
            return [dict(r) for r in csv.DictReader(f, delimiter="\t")]
    return read_jsonl(path)


def group_by(rows: Iterable[dict], key: str) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {}
    for r in rows:
        out.setdefault(str(r[key]), []).append(r)
    return out


def iter_sorted(rows: Iterable[dict]) -> Iterator[dict]:
    """Deterministic order: instance_id, then sample_index."""
    return iter(sorted(rows, key=lambda r: (str(r["instance_id"]), int(r.get("sample_index", 0)))))
