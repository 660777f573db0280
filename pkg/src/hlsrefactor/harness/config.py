"""Run configuration, loadable from YAML and overridable from the command line."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from hlsrefactor.llm.gateway import BackendConfig, ModelPolicy
from hlsrefactor.pragma.engine import OptimizationTarget
from hlsrefactor.refactor.context import Budget
from hlsrefactor.synth.adapter import AdapterConfig

DEFAULT_LADDER = ["gpt-4o-mini", "gpt-4o"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    src: Path
    top: str
    test: Path
    target: OptimizationTarget = OptimizationTarget.Latency
    streaming: bool = False
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    policy: ModelPolicy = field(default_factory=lambda: ModelPolicy(list(DEFAULT_LADDER)))
    budgets: Budget = field(default_factory=Budget)
    out_dir: Path = Path("runs")
    seed: int = 0
    name: str = ""
    optimize: str = "per_function"  # per_function | integrated | off
    strict_pragma_only: bool = False
    accept_nonstreaming: bool = True
    capture: str = "debugger"  # debugger | instrument
    max_cases: int = 8
    toolchain: dict = field(default_factory=dict)
    script: Path | None = None  # responses for the scripted backend

    def validate(self, need_backend: bool = True) -> None:
        if not self.top:
            raise ConfigError("top function name is empty")
        for p in (self.src, self.test):
            if not Path(p).is_file():
                raise ConfigError(f"no such file: {p}")
        if self.optimize not in ("per_function", "integrated", "off"):
            raise ConfigError(f"unknown optimize mode {self.optimize!r}")
        if self.capture not in ("debugger", "instrument"):
            raise ConfigError(f"unknown capture mode {self.capture!r}")
        if not need_backend:
            return
        if self.backend.kind == "replay" and (self.backend.transcript is None or not Path(self.backend.transcript).is_file()):
            raise ConfigError("replay backend needs an existing --transcript")
        if self.backend.kind == "scripted" and (self.script is None or not Path(self.script).is_file()):
            raise ConfigError("scripted backend needs an existing script file")

    @property
    def label(self) -> str:
        return self.name or Path(self.src).stem

    def digest(self) -> str:
        """Content digest of everything that determines a run's outcome."""
        def h(p):
            return hashlib.sha256(Path(p).read_bytes()).hexdigest() if p and Path(p).is_file() else None

        doc = {
            "src": h(self.src), "test": h(self.test), "top": self.top, "target": self.target.value,
            "streaming": self.streaming, "adapter": self.adapter.kind, "adapter_cmd": self.adapter.cmd,
            "backend": self.backend.kind, "transcript": h(self.backend.transcript), "script": h(self.script),
            "ladder": self.policy.ladder, "threshold": self.policy.escalation_threshold,
            "persist": self.policy.persist, "budgets": [self.budgets.max_outer_iterations,
                                                       self.budgets.max_inner_retries, self.budgets.test_timeout],
            "seed": self.seed, "optimize": self.optimize, "strict": self.strict_pragma_only,
            "accept_nonstreaming": self.accept_nonstreaming, "max_cases": self.max_cases,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _rel(base: Path, p) -> Path | None:
    if p is None:
        return None
    p = Path(p)
    return p if p.is_absolute() else base / p


def apply_models(cfg: RunConfig, models: dict) -> None:
    """Model ladder, escalation and backend settings from a models file."""
    if "ladder" in models:
        cfg.policy = ModelPolicy(list(models["ladder"]), int(models.get("escalation_threshold", 3)),
                                 persist=bool(models.get("persist", False)))
    backend = dict(models.get("backend") or {})
    if "rates" in models:
        backend.setdefault("rates", models["rates"])
    if backend:
        merged = {**_backend_dict(cfg.backend), **backend}
        cfg.backend = BackendConfig.from_dict(merged)


def _backend_dict(b: BackendConfig) -> dict:
    return {k: getattr(b, k) for k in b.__dataclass_fields__}


def from_dict(d: dict, base: Path = Path(".")) -> RunConfig:
    try:
        cfg = RunConfig(src=_rel(base, d["src"]), top=d["top"], test=_rel(base, d["test"]))
    except KeyError as e:
        raise ConfigError(f"missing config key {e.args[0]!r}") from None
    if "target" in d:
        cfg.target = OptimizationTarget(d["target"])
    for key in ("streaming", "seed", "name", "optimize", "strict_pragma_only", "accept_nonstreaming",
                "capture", "max_cases", "toolchain"):
        if key in d:
            setattr(cfg, key, d[key])
    if "out_dir" in d:
        cfg.out_dir = _rel(base, d["out_dir"])
    if "adapter" in d:
        a = d["adapter"]
        cfg.adapter = AdapterConfig.from_dict(a if isinstance(a, dict) else {"adapter": a})
    if "budgets" in d:
        cfg.budgets = Budget.from_dict(d["budgets"])
    if "models" in d:
        apply_models(cfg, d["models"])
    if "backend" in d:
        b = dict(d["backend"])
        if b.get("transcript"):
            b["transcript"] = _rel(base, b["transcript"])
        cfg.backend = BackendConfig.from_dict({**_backend_dict(cfg.backend), **b})
    if d.get("script"):
        cfg.script = _rel(base, d["script"])
    return cfg


def load_yaml(path) -> dict:
    p = Path(path)
    try:
        return yaml.safe_load(p.read_text()) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read {p}: {e}") from None


def load_suite(path) -> list[RunConfig]:
    """Benchmark suite: ``defaults`` merged into each entry of ``benchmarks``."""
    p = Path(path)
    doc = load_yaml(p)
    defaults = doc.get("defaults") or {}
    out = []
    for b in doc.get("benchmarks") or []:
        merged = {**defaults, **b}
        for k in ("models", "backend", "budgets"):
            if k in defaults and k in b:
                merged[k] = {**defaults[k], **b[k]}
        out.append(from_dict(merged, p.parent))
    if not out:
        raise ConfigError(f"{p} lists no benchmarks")
    return out
