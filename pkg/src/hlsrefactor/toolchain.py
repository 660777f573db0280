"""Compile and run C programs with a configurable compiler driver."""

from __future__ import annotations

import os
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

C_ENV = {"LC_ALL": "C", "LANG": "C"}


@dataclass
class CompileResult:
    ok: bool
    returncode: int
    log: str
    exe: Path | None = None


@dataclass
class RunResult:
    ok: bool
    returncode: int | None
    stdout: str
    stderr: str
    timed_out: bool = False

    @property
    def log(self) -> str:
        head = "TIMEOUT\n" if self.timed_out else f"exit status {self.returncode}\n"
        return head + self.stdout + ("\n" if self.stdout and not self.stdout.endswith("\n") else "") + self.stderr


@dataclass
class Toolchain:
    cc: list[str] = field(default_factory=lambda: ["gcc", "-std=gnu11"])
    cflags: list[str] = field(default_factory=lambda: ["-O0", "-w"])
    ldflags: list[str] = field(default_factory=lambda: ["-lm"])
    include_paths: list[str] = field(default_factory=list)
    compile_timeout: float = 60.0

    @classmethod
    def from_config(cls, cfg: dict | None) -> "Toolchain":
        cfg = cfg or {}
        tc = cls()
        if "cc" in cfg:
            tc.cc = shlex.split(cfg["cc"]) if isinstance(cfg["cc"], str) else list(cfg["cc"])
        for key in ("cflags", "ldflags", "include_paths"):
            if key in cfg:
                v = cfg[key]
                setattr(tc, key, shlex.split(v) if isinstance(v, str) else list(v))
        return tc

    def compile(self, src: Path, exe: Path, extra_flags=(), cwd: Path | None = None) -> CompileResult:
        cmd = [*self.cc, *self.cflags, *extra_flags]
        cmd += [f"-I{p}" for p in self.include_paths]
        cmd += [str(src), "-o", str(exe), *self.ldflags]
        env = {**os.environ, **C_ENV}
        try:
            proc = subprocess.run(
                cmd, capture_output=True, text=True, cwd=cwd, env=env, timeout=self.compile_timeout
            )
        except FileNotFoundError as exc:
            return CompileResult(False, 127, f"compiler not found: {exc}")
        except subprocess.TimeoutExpired:
            return CompileResult(False, -1, "compiler timed out")
        log = proc.stderr + proc.stdout
        return CompileResult(proc.returncode == 0, proc.returncode, log, exe if proc.returncode == 0 else None)


def run_program(exe: Path, timeout: float, cwd: Path | None = None, args=()) -> RunResult:
    env = {**os.environ, **C_ENV}
    try:
        proc = subprocess.run(
            [str(exe), *args], capture_output=True, cwd=cwd, env=env, timeout=timeout
        )
    except subprocess.TimeoutExpired as exc:
        out = (exc.stdout or b"").decode("utf-8", "replace")
        err = (exc.stderr or b"").decode("utf-8", "replace")
        return RunResult(False, None, out, err, timed_out=True)
    out = proc.stdout.decode("utf-8", "replace")
    err = proc.stderr.decode("utf-8", "replace")
    return RunResult(proc.returncode == 0, proc.returncode, out, err)
