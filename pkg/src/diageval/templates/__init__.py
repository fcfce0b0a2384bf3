"""Versioned prompt templates (``<name>_v<N>.txt``, ``$placeholder`` syntax)."""

from __future__ import annotations

import functools
import string
from importlib import resources


@functools.lru_cache(maxsize=None)
def load(name: str, version: int = 1) -> string.Template:
    text = resources.files(__name__).joinpath(f"{name}_v{version}.txt").read_text("utf-8")
    return string.Template(text)


def template_id(name: str, version: int = 1) -> str:
    return f"{name}_v{version}"
