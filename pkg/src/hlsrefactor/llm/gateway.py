"""Model access: escalation policy, usage accounting and the backends."""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import httpx


class BackendError(RuntimeError):
    def __init__(self, status: int, body: str):
        super().__init__(f"backend error {status}: {body[:200]}")
        self.status = status
        self.body = body


class ReplayMiss(KeyError):
    def __init__(self, digest: str):
        super().__init__(digest)
        self.digest = digest

    def __str__(self):
        return f"no recorded response for request {self.digest}"


def request_digest(model_id: str, request: list[dict]) -> str:
    canon = json.dumps({"model": model_id, "messages": request}, sort_keys=True, separators=(",", ":"),
                       ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class PromptExchange:
    request: list[dict]
    model_id: str
    response_text: str
    input_tokens: int
    output_tokens: int
    request_digest: str = ""

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if not self.request_digest:
            self.request_digest = request_digest(self.model_id, self.request)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "PromptExchange":
        return cls(**json.loads(line))


@dataclass
class ModelPolicy:
    ladder: list[str]
    escalation_threshold: int = 3
    failures_at_current: int = 0
    rung: int = 0
    persist: bool = False  # keep the rung across work items

    def __post_init__(self):
        if not self.ladder:
            raise ValueError("model ladder must not be empty")

    def new_item(self) -> None:
        if not self.persist:
            self.rung = 0
            self.failures_at_current = 0


def select_model(policy: ModelPolicy) -> str:
    return policy.ladder[policy.rung]


def record_failure(policy: ModelPolicy) -> ModelPolicy:
    policy.failures_at_current += 1
    if policy.failures_at_current >= policy.escalation_threshold:
        policy.rung = min(policy.rung + 1, len(policy.ladder) - 1)
        policy.failures_at_current = 0
    return policy


def record_success(policy: ModelPolicy) -> ModelPolicy:
    policy.failures_at_current = 0
    return policy


@dataclass
class ModelUsage:
    prompts: int = 0
    input_tokens: int = 0
    output_tokens: int = 0


@dataclass
class UsageLedger:
    # model -> (cost per input token, cost per output token)
    rates: dict[str, tuple[float, float]] = field(default_factory=dict)
    per_model: dict[str, ModelUsage] = field(default_factory=dict)
    exchanges: list[PromptExchange] = field(default_factory=list)

    def record(self, ex: PromptExchange) -> None:
        u = self.per_model.setdefault(ex.model_id, ModelUsage())
        u.prompts += 1
        u.input_tokens += ex.input_tokens
        u.output_tokens += ex.output_tokens
        self.exchanges.append(ex)

    def totals(self) -> ModelUsage:
        t = ModelUsage()
        for u in self.per_model.values():
            t.prompts += u.prompts
            t.input_tokens += u.input_tokens
            t.output_tokens += u.output_tokens
        return t

    def cost(self) -> float:
        total = 0.0
        for m, u in self.per_model.items():
            rin, rout = self.rates.get(m, (0.0, 0.0))
            total += u.input_tokens * rin + u.output_tokens * rout
        return total


@dataclass
class BackendConfig:
    kind: str = "replay"  # replay | live | scripted
    transcript: Path | None = None
    provider: str = "openai"  # openai | anthropic
    endpoint: str = ""
    api_key_env: str = "HLSREFACTOR_API_KEY"
    model_map: dict[str, str] = field(default_factory=dict)
    rates: dict[str, tuple[float, float]] = field(default_factory=dict)
    retries: int = 3
    backoff: tuple[float, ...] = (1.0, 4.0, 16.0)
    timeout: float = 120.0
    max_tokens: int = 4096

    @classmethod
    def from_dict(cls, d: dict | None) -> "BackendConfig":
        d = dict(d or {})
        if d.get("transcript"):
            d["transcript"] = Path(d["transcript"])
        if "rates" in d:
            d["rates"] = {m: tuple(r) for m, r in d["rates"].items()}
        if "backoff" in d:
            d["backoff"] = tuple(d["backoff"])
        return cls(**d)


def approx_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def request_tokens(request: list[dict]) -> int:
    return sum(approx_tokens(m["content"]) for m in request)


class ReplayBackend:
    """Answers from a recorded transcript keyed by request digest.

    Repeated identical requests get the recorded responses in order; once
    those run out the last one is repeated.
    """

    def __init__(self, exchanges):
        self.queues: dict[str, list[PromptExchange]] = defaultdict(list)
        self.used: dict[str, int] = defaultdict(int)
        for ex in exchanges:
            self.queues[ex.request_digest].append(ex)

    @classmethod
    def from_file(cls, path) -> "ReplayBackend":
        return cls(read_transcript(path))

    def __call__(self, request: list[dict], model_id: str) -> PromptExchange:
        d = request_digest(model_id, request)
        q = self.queues.get(d)
        if not q:
            raise ReplayMiss(d)
        k = min(self.used[d], len(q) - 1)
        self.used[d] += 1
        src = q[k]
        return PromptExchange(request, model_id, src.response_text, src.input_tokens, src.output_tokens, d)


class ScriptedBackend:
    """Responses from a list or a callable; token counts estimated from text length."""

    def __init__(self, responses: list[str] | Callable[[list[dict], str], str]):
        self.responses = responses
        self.calls = 0

    def __call__(self, request: list[dict], model_id: str) -> PromptExchange:
        if callable(self.responses):
            text = self.responses(request, model_id)
        else:
            if not self.responses:
                raise BackendError(0, "scripted backend has no responses")
            text = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        return PromptExchange(request, model_id, text, request_tokens(request), approx_tokens(text))


def script_responder(rules: list[dict]) -> Callable[[list[dict], str], str]:
    """Pick the first unused rule whose ``match`` regex hits the last message.

    Rules marked ``repeat: true`` are never used up.
    """
    used: set[int] = set()

    def respond(request: list[dict], model_id: str) -> str:
        last = request[-1]["content"]
        for k, r in enumerate(rules):
            if k in used or not re.search(r.get("match", ""), last):
                continue
            if not r.get("repeat"):
                used.add(k)
            return r["response"]
        raise BackendError(0, "script has no response for this request")

    return respond


class LiveBackend:
    """OpenAI- or Anthropic-style HTTPS chat endpoint."""

    def __init__(self, cfg: BackendConfig, client: httpx.Client | None = None, sleep=time.sleep):
        self.cfg = cfg
        self.client = client or httpx.Client(timeout=cfg.timeout)
        self.sleep = sleep

    def _payload(self, request, model):
        if self.cfg.provider == "anthropic":
            system = "\n".join(m["content"] for m in request if m["role"] == "system")
            msgs = [m for m in request if m["role"] != "system"]
            return {"model": model, "system": system, "messages": msgs, "max_tokens": self.cfg.max_tokens}
        return {"model": model, "messages": request}

    def _headers(self):
        key = os.environ.get(self.cfg.api_key_env, "")
        if self.cfg.provider == "anthropic":
            return {"x-api-key": key, "anthropic-version": "2023-06-01"}
        return {"Authorization": f"Bearer {key}"}

    def _endpoint(self):
        if self.cfg.endpoint:
            return self.cfg.endpoint
        if self.cfg.provider == "anthropic":
            return "https://api.anthropic.com/v1/messages"
        return "https://api.openai.com/v1/chat/completions"

    def _parse(self, body: dict) -> tuple[str, int, int]:
        if self.cfg.provider == "anthropic":
            text = "".join(b.get("text", "") for b in body.get("content", []))
            u = body.get("usage", {})
            return text, u.get("input_tokens", 0), u.get("output_tokens", 0)
        text = body["choices"][0]["message"]["content"]
        u = body.get("usage", {})
        return text, u.get("prompt_tokens", 0), u.get("completion_tokens", 0)

    def __call__(self, request: list[dict], model_id: str) -> PromptExchange:
        model = self.cfg.model_map.get(model_id, model_id)
        last = None
        for attempt in range(self.cfg.retries):
            try:
                r = self.client.post(self._endpoint(), json=self._payload(request, model), headers=self._headers())
            except httpx.TransportError as e:
                last = BackendError(0, str(e))
            else:
                if r.status_code >= 500 or r.status_code == 429:
                    last = BackendError(r.status_code, r.text)
                elif r.status_code >= 400:
                    raise BackendError(r.status_code, r.text)
                else:
                    text, tin, tout = self._parse(r.json())
                    return PromptExchange(request, model_id, text, tin, tout)
            if attempt < self.cfg.retries - 1:
                self.sleep(self.cfg.backoff[min(attempt, len(self.cfg.backoff) - 1)])
        raise last


def make_backend(cfg: BackendConfig, scripted=None):
    if cfg.kind == "replay":
        if cfg.transcript is None:
            raise ValueError("replay backend needs a transcript")
        return ReplayBackend.from_file(cfg.transcript)
    if cfg.kind == "scripted":
        if isinstance(scripted, list) and scripted and isinstance(scripted[0], dict):
            scripted = script_responder(scripted)
        return ScriptedBackend(scripted or [])
    if cfg.kind == "live":
        return LiveBackend(cfg)
    raise ValueError(f"unknown backend {cfg.kind!r}")


def read_transcript(path) -> list[PromptExchange]:
    p = Path(path)
    return [PromptExchange.from_json(ln) for ln in p.read_text().splitlines() if ln.strip()]


def append_transcript(path, ex: PromptExchange) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(ex.to_json() + "\n")


@dataclass
class Gateway:
    backend: Callable[[list[dict], str], PromptExchange]
    ledger: UsageLedger = field(default_factory=UsageLedger)
    transcript_path: Path | None = None

    def complete(self, request: list[dict], policy: ModelPolicy) -> PromptExchange:
        return complete(request, policy, self.backend, self.ledger, self.transcript_path)


def complete(request, policy: ModelPolicy, backend, ledger: UsageLedger | None = None, record_to=None) -> PromptExchange:
    if not request or request[0]["role"] != "system":
        raise ValueError("request must start with a system message")
    ex = backend(request, select_model(policy))
    if ledger is not None:
        ledger.record(ex)
    if record_to is not None:
        append_transcript(record_to, ex)
    return ex
