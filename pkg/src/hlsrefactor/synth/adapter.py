"""Synthesis back ends: the built-in lint or any external command."""

from __future__ import annotations

import re
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path

from hlsrefactor.cfront import CallGraph
from hlsrefactor.synth.lint import ICL_KEYS, LintCategory, LintConfig, LintDiagnostic, SynthResult, lint


class AdapterFailure(RuntimeError):
    """The tool itself broke (crash, missing binary), as opposed to rejecting the design."""

    def __init__(self, exit_code: int, log: str = ""):
        super().__init__(f"synthesis tool failed with exit code {exit_code}")
        self.exit_code = exit_code
        self.log = log


@dataclass
class AdapterConfig:
    kind: str = "lint"  # lint | command
    cmd: list[str] = field(default_factory=list)
    ok_exit: list[int] = field(default_factory=lambda: [0])
    reject_exit: list[int] = field(default_factory=lambda: [1])
    error_regexes: list[tuple[str, str | None]] | None = None
    timeout: float = 600
    lint: LintConfig = field(default_factory=LintConfig)

    @classmethod
    def from_dict(cls, d: dict | None) -> "AdapterConfig":
        d = dict(d or {})
        cfg = cls(kind=d.get("adapter", d.get("kind", "lint")))
        cmd = d.get("command") or {}
        if cmd:
            c = cmd.get("cmd", [])
            cfg.cmd = shlex.split(c) if isinstance(c, str) else list(c)
            cfg.ok_exit = list(cmd.get("ok_exit", cfg.ok_exit))
            cfg.reject_exit = list(cmd.get("reject_exit", cfg.reject_exit))
            if "error_regexes" in cmd:
                cfg.error_regexes = [(r["pattern"], r.get("category")) for r in cmd["error_regexes"]]
            cfg.timeout = float(cmd.get("timeout", cfg.timeout))
        if "lint" in d:
            cfg.lint = LintConfig.from_dict(d["lint"])
        if cfg.kind not in ("lint", "command"):
            raise ValueError(f"unknown adapter {cfg.kind!r}")
        return cfg


# ErrorClass name -> lint category for records parsed out of tool logs
_CLASS_CATEGORY = {
    "SynthDynamicMemory": LintCategory.DynamicMemory,
    "SynthRecursion": LintCategory.Recursion,
    "SynthPointer": LintCategory.InterfacePointer,
    "SynthFloat": LintCategory.FloatingPoint,
}

_LOCKS: dict[str, threading.Lock] = {}
_LOCKS_GUARD = threading.Lock()


def _dir_lock(path: Path) -> threading.Lock:
    with _LOCKS_GUARD:
        return _LOCKS.setdefault(str(path.resolve()), threading.Lock())


def _regex_table(cfg: AdapterConfig) -> list[tuple[re.Pattern, LintCategory | None]]:
    if cfg.error_regexes is not None:
        return [(re.compile(p), LintCategory(c) if c else None) for p, c in cfg.error_regexes]
    from hlsrefactor.prompts.library import error_table

    return [(rx, _CLASS_CATEGORY.get(cls.value)) for rx, cls in error_table().get("synth", [])]


_LOC = re.compile(r"(?P<file>[\w./-]+\.\w+):(?P<line>\d+)(?::(?P<col>\d+))?")


def parse_tool_log(log: str, cfg: AdapterConfig) -> LintDiagnostic:
    """First error-looking line of a tool log, shaped as a diagnostic."""
    lines = [ln for ln in log.splitlines() if ln.strip()]
    first = next((ln for ln in lines if re.search(r"(?i)\berror\b", ln)), lines[0] if lines else "synthesis failed")
    category = None
    for rx, cat in _regex_table(cfg):
        if rx.search(first):
            category = cat
            break
    m = _LOC.search(first)
    loc = (int(m["line"]), int(m["col"] or 0)) if m else (0, 0)
    icl = ICL_KEYS.get(category) if category else None
    return LintDiagnostic(category, loc, first.strip(), icl, m["file"] if m else "")


def run_command(source: str, top: str, cfg: AdapterConfig, workdir: Path) -> SynthResult:
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    with _dir_lock(workdir):
        src = workdir / "candidate.c"
        src.write_text(source)
        subs = {"src": str(src), "top": top, "workdir": str(workdir)}
        argv = [a.format(**subs) for a in cfg.cmd]
        if not argv:
            raise AdapterFailure(127, "no command configured")
        try:
            p = subprocess.run(argv, cwd=workdir, capture_output=True, text=True, timeout=cfg.timeout)
        except FileNotFoundError as e:
            raise AdapterFailure(127, str(e)) from None
        except subprocess.TimeoutExpired:
            raise AdapterFailure(-9, f"timed out after {cfg.timeout}s") from None
        log = p.stdout + p.stderr
        (workdir / "synth.log").write_text(log)
    if p.returncode in cfg.ok_exit:
        return SynthResult(True, [], log, "command")
    if p.returncode in cfg.reject_exit:
        return SynthResult(False, [parse_tool_log(log, cfg)], log, "command")
    raise AdapterFailure(p.returncode, log)


def hls_synthesize(
    item,
    adapter: AdapterConfig,
    source: str | None = None,
    targets=None,
    graph: CallGraph | None = None,
    workdir: Path | None = None,
    include_paths=(),
) -> SynthResult:
    """Synthesize ``source`` (default: the item's current source) for the item's functions."""
    source = item.current_source if source is None else source
    targets = list(targets or item.members or [item.function])
    if adapter.kind == "command":
        return run_command(source, item.function, adapter, Path(workdir or "."))
    diags, seen = [], set()
    for t in targets:
        r = lint(source, t, graph, adapter.lint, include_paths=include_paths)
        for d in r.diagnostics:
            key = (d.category, d.location, d.message)
            if key not in seen:
                seen.add(key)
                diags.append(d)
    diags.sort(key=lambda d: d.location)
    log = "\n".join(d.render() for d in diags)
    if workdir is not None:
        Path(workdir).mkdir(parents=True, exist_ok=True)
        (Path(workdir) / "synth.log").write_text(log)
    return SynthResult(not diags, diags, log, "lint")
