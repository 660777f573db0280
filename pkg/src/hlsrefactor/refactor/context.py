"""State shared by the refactor and pragma stages of one run."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from hlsrefactor import ctext
from hlsrefactor.cfront import CallGraph
from hlsrefactor.design import Design, Source, compose_tu
from hlsrefactor.hier.testgen import UnitTest
from hlsrefactor.hier.workitems import HistoryEntry, WorkItem
from hlsrefactor.llm.gateway import Gateway, ModelPolicy, PromptExchange
from hlsrefactor.synth.adapter import AdapterConfig
from hlsrefactor.toolchain import RunResult, Toolchain, run_program

COMPILE_ONLY_MAIN = "int main(void) { return 0; }\n"


@dataclass
class Budget:
    max_outer_iterations: int = 20
    max_inner_retries: int = 6
    test_timeout: float = 30.0

    def __post_init__(self):
        if self.max_outer_iterations < 1 or self.max_inner_retries < 0 or self.test_timeout <= 0:
            raise ValueError("budgets must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "Budget":
        return cls(**(d or {}))


class BudgetExhausted(RuntimeError):
    def __init__(self, loop: str, function: str, last=None):
        super().__init__(f"{loop} budget exhausted for {function}")
        self.loop = loop
        self.function = function
        self.last = last


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class TestRun:
    """Compile and run of one composed translation unit."""

    compile_ok: bool
    test_ok: bool
    compile_log: str
    test_log: str
    run: RunResult | None = None


@dataclass
class EngineContext:
    design: Design
    graph: CallGraph
    gateway: Gateway
    policy: ModelPolicy
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    budget: Budget = field(default_factory=Budget)
    toolchain: Toolchain = field(default_factory=Toolchain)
    work_root: Path = Path("work")
    include_paths: list[str] = field(default_factory=list)
    accept_nonstreaming: bool = True
    compile_runs: Counter = field(default_factory=Counter)
    hls_runs: Counter = field(default_factory=Counter)
    prompt_index: Counter = field(default_factory=Counter)
    # signatures a parent prompt has already been given
    consumed: dict[str, str] = field(default_factory=dict)

    def descendants(self, item: WorkItem) -> set[str]:
        out: set[str] = set()
        for m in item.members or [item.function]:
            out |= self.graph.descendants(m)
        return out - set(item.members or [item.function])

    def owned(self, item: WorkItem) -> set[str]:
        """Functions the item may define: its members and the helpers it owns."""
        own = set(item.members or [item.function])
        return own | {n for n, e in self.design.entries.items() if e.owner in own}

    def compose(self, item: WorkItem, candidate: Source | None, test_text: str | None) -> str:
        return compose_tu(self.design, item.function, self.descendants(item), candidate, test_text)

    def iter_dir(self, fn: str, k: int, prefix: str = "iter") -> Path:
        d = self.work_root / fn / f"{prefix}_{k}"
        d.mkdir(parents=True, exist_ok=True)
        return d

    def ask(self, item: WorkItem, request: list[dict], kind: str, prefix: str = "iter") -> tuple[PromptExchange, Path]:
        """One prompt: complete it, persist the pair, and open its history entry."""
        ex = self.gateway.complete(request, self.policy)
        self.prompt_index[(item.function, prefix)] += 1
        d = self.iter_dir(item.function, self.prompt_index[(item.function, prefix)], prefix)
        (d / "prompt.json").write_text(
            json.dumps({"model": ex.model_id, "messages": request}, indent=2, sort_keys=True, ensure_ascii=False)
        )
        (d / "response.json").write_text(json.dumps({
            "model": ex.model_id,
            "request_digest": ex.request_digest,
            "response_text": ex.response_text,
            "input_tokens": ex.input_tokens,
            "output_tokens": ex.output_tokens,
        }, indent=2, sort_keys=True, ensure_ascii=False))
        item.history.append(HistoryEntry("", {"model": ex.model_id}, kind))
        return ex, d

    def build_and_test(self, item: WorkItem, tu_text: str, test: UnitTest | None, d: Path, tag: str = "") -> TestRun:
        src = d / f"tu{tag}.c"
        src.write_text(tu_text)
        exe = d / f"tu{tag}"
        self.compile_runs[item.function] += 1
        # relative names keep absolute run paths out of compiler messages (and so out of prompts)
        res = self.toolchain.compile(Path(src.name), Path(exe.name), cwd=d,
                                     extra_flags=[f"-I{p}" for p in self.include_paths])
        (d / f"compile{tag}.log").write_text(res.log)
        if not res.ok:
            return TestRun(False, False, res.log, "")
        run = run_program(exe.resolve(), self.budget.test_timeout, cwd=d)
        ok = run.ok
        log = run.log
        if ok and test is not None and test.expected_stdout is not None and run.stdout != test.expected_stdout:
            ok = False
            log += "\noutput differs from the reference run:\nexpected:\n" + test.expected_stdout + "\ngot:\n" + run.stdout
        (d / f"test{tag}.log").write_text(log)
        exe.unlink(missing_ok=True)
        return TestRun(True, ok, res.log, log, run)


def main_text(code: str) -> str | None:
    """Text of the ``main`` definition in ``code``, if there is one."""
    for c in ctext.split_chunks(code):
        if c.kind == "function" and c.name == "main":
            return c.text
    return None


def without_main(code: str) -> str:
    src = Source.parse(code)
    if "main" not in src.functions:
        return code
    c = src.functions["main"]
    return (code[: c.start] + code[c.end:]).strip("\n") + "\n"
