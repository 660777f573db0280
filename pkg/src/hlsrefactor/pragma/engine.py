"""Optimization stage: ask for pragmas, then check behavior, syntax and synthesis."""

from __future__ import annotations

import enum
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from hlsrefactor import ctext
from hlsrefactor.hier.testgen import UnitTest
from hlsrefactor.hier.workitems import Stage, WorkItem
from hlsrefactor.llm.gateway import record_failure, record_success
from hlsrefactor.prompts.library import NoCodeFound, extract_code, render_optimize
from hlsrefactor.refactor.context import COMPILE_ONLY_MAIN, EngineContext, without_main
from hlsrefactor.refactor.engine import NO_CODE_ERROR, _prepare, _route, _synth
from hlsrefactor.synth.pragmas import PragmaDirective, verify_pragmas
from hlsrefactor.toolchain import Toolchain, run_program


class OptimizationTarget(str, enum.Enum):
    Area = "area"
    Latency = "latency"


class CompileError(RuntimeError):
    def __init__(self, log: str):
        super().__init__("source does not compile")
        self.log = log


@dataclass
class OptResult:
    final_source: str
    directives: list[PragmaDirective] = field(default_factory=list)
    unrecognized_count: int = 0
    behavior_preserved: bool = True
    iterations: int = 0
    notes: list[str] = field(default_factory=list)


def _passes(tc: Toolchain, text: str, test: UnitTest, d: Path, tag: str, timeout: float) -> bool:
    src = d / f"{tag}.c"
    src.write_text(text.rstrip("\n") + '\n#line 1 "test.c"\n' + test.source_text)
    res = tc.compile(src, d / tag)
    if not res.ok:
        raise CompileError(res.log)
    run = run_program(d / tag, timeout, cwd=d)
    if not run.ok:
        return False
    return test.expected_stdout is None or run.stdout == test.expected_stdout


def diff_semantics(before: str, after: str, test: UnitTest, toolchain: Toolchain | None = None,
                   workdir: Path | None = None, timeout: float = 30.0) -> bool:
    """True iff ``after`` passes ``test``, with and without its pragma lines.

    Both sources are complete programs minus ``main``; the test supplies it.
    """
    tc = toolchain or Toolchain()
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(workdir or tmp)
        d.mkdir(parents=True, exist_ok=True)
        res = tc.compile(_write(d / "before.c", before + "\n" + COMPILE_ONLY_MAIN), d / "before")
        if not res.ok:
            raise CompileError(res.log)
        if not _passes(tc, after, test, d, "after", timeout):
            return False
        return _passes(tc, ctext.strip_pragmas(after), test, d, "after_nopragma", timeout)


def _write(p: Path, text: str) -> Path:
    p.write_text(text)
    return p


def _pragma_only(ctx: EngineContext, item: WorkItem, code: str) -> bool:
    src = _prepare(ctx, item, code)
    for n in ctx.owned(item):
        if n not in src.functions:
            return False
        if ctext.code_tokens(src.functions[n].text) != ctext.code_tokens(ctx.design.function_text(n)):
            return False
    return True


def optimize(ctx: EngineContext, item: WorkItem, target: OptimizationTarget | str, strict: bool = False) -> OptResult:
    """Pragma insertion for one accepted item; failure falls back to the unoptimized source."""
    target = OptimizationTarget(getattr(target, "value", target))
    if item.stage not in (Stage.OPTIMIZE, Stage.DONE):
        raise ValueError(f"{item.function} has not finished refactoring")
    before = item.current_source
    ctx.policy.new_item()
    first = render_optimize(item, target.value)
    request = first
    test_text = item.unit_test.source_text if item.unit_test is not None else COMPILE_ONLY_MAIN
    for k in range(1, ctx.budget.max_outer_iterations + 1):
        ex, d = ctx.ask(item, request, "optimize" if k == 1 else "optimize_retry", prefix="opt_iter")
        error = ""
        try:
            code = extract_code(ex.response_text, item.includes)
        except NoCodeFound:
            code, error = None, NO_CODE_ERROR
        if code is not None:
            (d / "candidate.c").write_text(code)
            body = without_main(code)
            directives = verify_pragmas(body)
            outcome = {"directives": len(directives), "unrecognized": sum(not x.recognized for x in directives)}
            if strict and not _pragma_only(ctx, item, code):
                error = "The code was changed beyond adding pragmas; only add pragmas."
            else:
                src = _prepare(ctx, item, code)
                run = ctx.build_and_test(item, ctx.compose(item, src, test_text), item.unit_test, d)
                if run.test_ok:
                    stripped = _prepare(ctx, item, ctext.strip_pragmas(code))
                    run = ctx.build_and_test(item, ctx.compose(item, stripped, test_text), item.unit_test, d, "_nopragma")
                outcome["behavior_preserved"] = run.test_ok
                if not run.test_ok:
                    error = (run.test_log or run.compile_log).strip()
                else:
                    res = _synth(ctx, item, code, d)
                    outcome["synth_ok"] = res.ok
                    if res.ok:
                        record_success(ctx.policy)
                        item.history[-1].candidate = code
                        item.history[-1].outcome.update(outcome)
                        ctx.design.accept(item.function, src, set(item.children))
                        item.current_source = ctx.design.visible_code(item.function, item.members)
                        item.stage = Stage.DONE
                        return OptResult(item.current_source, directives,
                                         sum(not x.recognized for x in directives), True, k)
                    error = _route(res)[0]
            item.history[-1].candidate = code
            item.history[-1].outcome.update(outcome)
        record_failure(ctx.policy)
        request = first + [
            {"role": "assistant", "content": ex.response_text},
            {"role": "user", "content": "The current problem is:\n" + error},
        ]
    item.current_source = before
    item.stage = Stage.DONE
    return OptResult(before, [], 0, True, ctx.budget.max_outer_iterations, ["NoOptimization"])
