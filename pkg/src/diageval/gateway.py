"""Chat-completion client with retries, bounded concurrency and cassettes.

Every remote model (evaluator, judge, data generator, reward scorer) is
reached through `Gateway.complete`. In ``replay`` mode responses come from a
`Cassette` file and the transport is never touched, which keeps tests and
re-runs deterministic and offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

logger = logging.getLogger(__name__)

ROLES = ("evaluator", "judge", "datagen", "reward")
MODES = ("live", "record", "replay")


class GatewayError(RuntimeError):
    pass


class EndpointError(GatewayError):
    pass


class RateLimited(EndpointError):
    pass


class CassetteMiss(GatewayError):
    pass


class TransientError(Exception):
    """Raised by a transport for a failure worth retrying (429, 5xx, timeouts)."""

    def __init__(self, cause: Exception):
        super().__init__(str(cause))
        self.cause = cause


@dataclass(frozen=True)
class ChatRequest:
    role: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    top_p: float = 1.0
    n_samples: int = 1
    max_tokens: int = 1024

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown endpoint role {self.role!r}")
        object.__setattr__(self, "messages", tuple((r, t) for r, t in self.messages))
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")

    @classmethod
    def user(cls, role: str, prompt: str, **params) -> "ChatRequest":
        return cls(role, (("user", prompt),), **params)

    @property
    def greedy(self) -> bool:
        return self.temperature == 0

    def canonical(self) -> dict:
        return {
            "role": self.role,
            "messages": [[r, " ".join(t.split())] for r, t in self.messages],
            "params": {"max_tokens": self.max_tokens, "n_samples": self.n_samples,
                       "temperature": float(self.temperature), "top_p": float(self.top_p)},
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, ensure_ascii=False,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class Cassette:
    """fingerprint -> ordered recorded calls, each a list of response texts."""

    entries: dict[str, list[list[str] | None]] = field(default_factory=dict)
    requests: dict[str, dict] = field(default_factory=dict)
    path: Path | None = None

    def __post_init__(self):
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Cassette":
        cas = cls(path=Path(path))
        if not cas.path.exists():
            return cas
        with open(cas.path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                fp = rec["fingerprint"]
                cas.entries.setdefault(fp, []).append(list(rec["responses"]))
                cas.requests.setdefault(fp, rec.get("request", {}))
        return cas

    def put(self, request: ChatRequest, slot: int, responses: list[str]) -> None:
        fp = request.fingerprint()
        with self._lock:
            calls = self.entries.setdefault(fp, [])
            calls.extend([None] * (slot + 1 - len(calls)))
            calls[slot] = list(responses)
            self.requests.setdefault(fp, request.canonical())

    def get(self, request: ChatRequest, slot: int) -> list[str]:
        calls = self.entries.get(request.fingerprint(), [])
        if slot >= len(calls) or calls[slot] is None:
            raise CassetteMiss(
                f"no recorded response #{slot} for {request.role} request "
                f"{request.fingerprint()[:12]}")
        return list(calls[slot])

    def save(self, path: str | os.PathLike | None = None) -> None:
        path = Path(path or self.path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for fp in sorted(self.entries):
                for responses in self.entries[fp]:
                    if responses is None:
                        continue
                    f.write(json.dumps({"fingerprint": fp, "request": self.requests.get(fp),
                                        "responses": responses},
                                       ensure_ascii=False, sort_keys=True) + "\n")


class Transport(Protocol):
    def __call__(self, request: ChatRequest) -> list[str]: ...


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    api_key_env: str = "DIAGEVAL_API_KEY"
    timeout: float = 120.0

    @classmethod
    def from_dict(cls, d: dict) -> "EndpointConfig":
        return cls(**d)


class HttpTransport:
    """OpenAI-style ``POST {url}/chat/completions`` over httpx."""

    def __init__(self, config: EndpointConfig, client=None):
        import httpx

        self.config = config
        self._httpx = httpx
        self._client = client or httpx.Client(timeout=config.timeout)

    def __call__(self, request: ChatRequest) -> list[str]:
        httpx = self._httpx
        headers = {}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.config.model,
            "messages": [{"role": r, "content": t} for r, t in request.messages],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "n": request.n_samples,
            "max_tokens": request.max_tokens,
        }
        url = self.config.url.rstrip("/") + "/chat/completions"
        try:
            resp = self._client.post(url, json=payload, headers=headers)
        except (httpx.TimeoutException, httpx.NetworkError) as exc:
            raise TransientError(EndpointError(f"{url}: {exc}")) from exc
        if resp.status_code == 429:
            raise TransientError(RateLimited(f"{url}: HTTP 429"))
        if resp.status_code >= 500:
            raise TransientError(EndpointError(f"{url}: HTTP {resp.status_code}"))
        if resp.status_code >= 400:
            raise EndpointError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        choices = resp.json().get("choices", [])
        return [c["message"]["content"] for c in choices]


class Gateway:
    """Uniform access to the remote models, one transport per role.

    ``max_in_flight`` bounds concurrent requests in `complete_many`; results
    are always returned in input order.
    """

    def __init__(self, mode: str = "replay", cassette: Cassette | None = None,
                 transports: dict[str, Transport] | None = None, max_in_flight: int = 8,
                 max_attempts: int = 5, base_delay: float = 1.0, max_delay: float = 30.0,
                 sleep: Callable[[float], None] = time.sleep, seed: int | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown gateway mode {mode!r}")
        if mode in ("record", "replay") and cassette is None:
            raise ValueError(f"{mode} mode needs a cassette")
        self.mode = mode
        self.cassette = cassette
        self.transports = dict(transports or {})
        if mode == "replay" and self.transports:
            raise ValueError("replay mode does not take live transports")
        self.max_in_flight = max_in_flight
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.max_delay = max_delay
        self._sleep = sleep
        self._jitter = random.Random(seed)
        self._cursor: dict[str, int] = {}
        self._cursor_lock = threading.Lock()

    def _slot(self, request: ChatRequest) -> int:
        fp = request.fingerprint()
        with self._cursor_lock:
            slot = self._cursor.get(fp, 0)
            self._cursor[fp] = slot + 1
        return slot

    def _call(self, request: ChatRequest) -> list[str]:
        transport = self.transports.get(request.role)
        if transport is None:
            raise EndpointError(f"no endpoint configured for role {request.role!r}")
        delay = self.base_delay
        for attempt in range(1, self.max_attempts + 1):
            try:
                responses = transport(request)
            except TransientError as exc:
                if attempt == self.max_attempts:
                    raise exc.cause from exc
                wait = min(self.max_delay, delay) * (0.5 + self._jitter.random() / 2)
                logger.warning("%s request failed (%s), retry %d in %.1fs",
                               request.role, exc, attempt, wait)
                self._sleep(wait)
                delay *= 2
                continue
            if len(responses) != request.n_samples:
                raise EndpointError(f"asked for {request.n_samples} samples, "
                                    f"got {len(responses)}")
            return list(responses)
        raise AssertionError("unreachable")

    def _complete_slot(self, request: ChatRequest, slot: int) -> list[str]:
        if self.mode == "replay":
            return self.cassette.get(request, slot)
        responses = self._call(request)
        if self.mode == "record":
            self.cassette.put(request, slot, responses)
        return responses

    def complete(self, request: ChatRequest) -> list[str]:
        return self._complete_slot(request, self._slot(request))

    def complete_many(self, requests: Sequence[ChatRequest]) -> list[list[str]]:
        slots = [self._slot(r) for r in requests]
        if self.mode == "replay" or self.max_in_flight <= 1:
            return [self._complete_slot(r, s) for r, s in zip(requests, slots)]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            futures = [pool.submit(self._complete_slot, r, s) for r, s in zip(requests, slots)]
            return [f.result() for f in futures]

    def save(self) -> None:
        if self.mode == "record" and self.cassette is not None:
            self.cassette.save()


def load_endpoints(path: str | os.PathLike) -> dict[str, EndpointConfig]:
    """Read ``{"endpoints": {role: {url, model, ...}}}`` from a JSON file."""
    with open(path, encoding="utf-8") as f:
        cfg = json.load(f)
    out = {}
    for role, d in cfg.get("endpoints", {}).items():
        if role not in ROLES:
            raise ValueError(f"unknown endpoint role {role!r} in {path}")
        out[role] = EndpointConfig.from_dict(d)
    return out
