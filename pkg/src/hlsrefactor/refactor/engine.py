"""The refactoring double loop.

The inner loop compiles a candidate together with the accepted children and
the item's unit test, re-prompting on compile errors. The outer loop runs
synthesis on candidates that pass their test and re-prompts with the first
synthesis error until one is clean.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace

from hlsrefactor import ctext
from hlsrefactor.design import Source, _fake_chunk, strip_functions
from hlsrefactor.hier.testgen import UnitTest
from hlsrefactor.hier.workitems import Stage, WorkItem, child_signature
from hlsrefactor.llm.gateway import record_failure, record_success
from hlsrefactor.prompts.library import (
    ICL_FOR_CLASS,
    ErrorClass,
    NoCodeFound,
    classify_error,
    extract_code,
    render_refactor,
)
from hlsrefactor.refactor.context import (
    COMPILE_ONLY_MAIN,
    BudgetExhausted,
    EngineContext,
    digest_text,
    main_text,
    without_main,
)
from hlsrefactor.synth.adapter import hls_synthesize
from hlsrefactor.synth.lint import SynthResult
from hlsrefactor.synth.streaming import StreamingVerdict, detect_streaming_interface

log = logging.getLogger(__name__)

NO_CODE_ERROR = "No C code block was found in the previous answer."


class PinnedSignatureViolation(RuntimeError):
    def __init__(self, function: str, pinned: str, new: str):
        super().__init__(f"{function}: accepted signature changed from '{pinned}' to '{new}'")
        self.function = function
        self.pinned = pinned
        self.new = new


@dataclass
class GuardViolation:
    kind: str  # redefinition | signature
    function: str
    detail: str

    def render(self) -> str:
        return f"{self.function}: {self.detail}"


@dataclass
class IterationOutcome:
    candidate_digest: str
    compile_ok: bool = False
    test_ok: bool = False
    synth_ok: bool = False
    error_class: ErrorClass | None = None
    logs: tuple[str, str, str] = ("", "", "")
    violations: list[GuardViolation] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "candidate_digest": self.candidate_digest,
            "compile_ok": self.compile_ok,
            "test_ok": self.test_ok,
            "synth_ok": self.synth_ok,
            "error_class": self.error_class.value if self.error_class else None,
        }


@dataclass
class RefactorResult:
    function: str
    done: bool
    final_source: str
    signature: str = ""
    prompts: int = 0
    outcomes: list[IterationOutcome] = field(default_factory=list)
    streaming_verdict: StreamingVerdict | None = None
    warnings: list[str] = field(default_factory=list)


# ---- signature guard ----------------------------------------------------------

def _arity(params_text: str) -> int | None:
    toks = [t.text for t in ctext.tokenize(params_text)]
    if not toks or toks == ["void"]:
        return 0
    if "..." in toks:
        return None
    depth, n = 0, 1
    for t in toks:
        if t in "([{":
            depth += 1
        elif t in ")]}":
            depth -= 1
        elif t == "," and depth == 0:
            n += 1
    return n


def _paren_args(text: str, open_pos: int) -> str:
    depth = 0
    for k in range(open_pos, len(text)):
        ch = text[k]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return text[open_pos + 1:k]
    return text[open_pos + 1:]


def _sig_arity(sig: str) -> int | None:
    k = sig.find("(")
    return _arity(_paren_args(sig, k)) if k >= 0 else None


def _call_arity(args: str) -> int:
    return 0 if not args.strip() else _arity(args) or 0


def guard_child_signatures(item: WorkItem, candidate: str) -> list[GuardViolation]:
    """Redefinitions of pinned children and calls that disagree with their pinned arity."""
    pinned = dict(zip(item.children, item.pinned_child_signatures))
    if not pinned:
        return []
    src = Source.parse(candidate)
    out: list[GuardViolation] = []
    for name in src.order:
        if name in pinned:
            out.append(GuardViolation("redefinition", name, f"redefines the provided function '{name}'"))
    for c in src.context:
        if c.kind == "prototype" and c.name in pinned:
            want, got = _sig_arity(pinned[c.name]), _sig_arity(c.text)
            if want is not None and got is not None and want != got:
                out.append(GuardViolation("signature", c.name, f"declares '{c.name}' with {got} parameters, "
                                          f"the provided signature is '{pinned[c.name]}'"))
    for name in src.order:
        if name in pinned:
            continue
        body = src.functions[name].text
        for m in re.finditer(r"\b(\w+)\s*\(", body):
            callee = m.group(1)
            if callee not in pinned or m.start() < body.find("{"):
                continue
            want = _sig_arity(pinned[callee])
            got = _call_arity(_paren_args(body, m.end() - 1))
            if want is not None and want != got:
                out.append(GuardViolation("signature", callee, f"'{name}' calls '{callee}' with {got} arguments, "
                                          f"the provided signature is '{pinned[callee]}'"))
    return out


# ---- candidate handling -------------------------------------------------------

def _prepare(ctx: EngineContext, item: WorkItem, code: str) -> Source:
    """The candidate as linked: no main, no foreign functions, owned helpers filled in."""
    src = Source.parse(without_main(code))
    own = ctx.owned(item)
    foreign = {n for n in src.order if n in ctx.design.entries and n not in own}
    src = strip_functions(src, foreign)
    for n in ctx.design.order:
        if n in own and n not in src.functions and n != item.function:
            src.functions[n] = _fake_chunk(ctx.design.function_text(n))
            src.order.insert(0, n)
    return src


def _test_text(item: WorkItem, code: str) -> str | None:
    if item.stage == Stage.STREAMING:
        return main_text(code)
    if item.unit_test is not None:
        return item.unit_test.source_text
    return COMPILE_ONLY_MAIN


def _view(item: WorkItem, code: str) -> WorkItem:
    return replace(item, current_source=without_main(code).strip("\n"))


def _route(result: SynthResult) -> tuple[str, str | None, ErrorClass]:
    if result.adapter == "lint":
        text = result.first_error
    else:
        text = result.tool_log.strip() or result.first_error
    diag = result.diagnostics[0] if result.diagnostics else None
    cls = classify_error("synth", text, diag)
    icl = diag.icl_key if diag is not None and diag.icl_key else ICL_FOR_CLASS[cls]
    return text, icl, cls


def _log_history(item: WorkItem, candidate: str, outcome: IterationOutcome) -> None:
    if item.history:
        h = item.history[-1]
        h.candidate = candidate
        h.outcome.update(outcome.to_dict())


def run_inner(ctx: EngineContext, item: WorkItem, candidate: str | None, d) -> tuple[IterationOutcome, str]:
    """Compile and test ``candidate``, re-prompting on compile errors.

    ``candidate`` is None when the answer held no code. Returns the outcome
    of the last attempt and the candidate it was for. Raises
    BudgetExhausted("inner") when compile retries run out.
    """
    retries = 0
    last_code = item.current_source
    while True:
        violations: list[GuardViolation] = []
        if candidate is None:
            out = IterationOutcome("", error_class=ErrorClass.CompileError, logs=(NO_CODE_ERROR, "", ""))
            _log_history(item, "", out)
        else:
            last_code = candidate
            violations = guard_child_signatures(item, candidate)
            src = _prepare(ctx, item, candidate)
            (d / "candidate.c").write_text(candidate)
            out = IterationOutcome(digest_text(candidate), violations=violations)
            test_text = _test_text(item, candidate)
            if item.function not in src.functions:
                out.error_class = ErrorClass.CompileError
                out.logs = (f"error: the answer does not define '{item.function}'", "", "")
            elif test_text is None:
                # streaming answers must bring their own test main
                out.compile_ok = True
                out.error_class = ErrorClass.TestFailure
                out.logs = ("", "error: the answer does not include a main function", "")
                _log_history(item, candidate, out)
                return out, candidate
            else:
                run = ctx.build_and_test(item, ctx.compose(item, src, test_text), item.unit_test, d)
                out.compile_ok, out.test_ok = run.compile_ok, run.test_ok
                out.logs = (run.compile_log, run.test_log, "")
                if run.compile_ok:
                    if not run.test_ok:
                        out.error_class = ErrorClass.TestFailure
                    _log_history(item, candidate, out)
                    return out, candidate
                out.error_class = classify_error("compiler", run.compile_log)
            _log_history(item, candidate, out)
        if retries >= ctx.budget.max_inner_retries:
            raise BudgetExhausted("inner", item.function, out)
        retries += 1
        err = out.logs[0].strip()
        icl = ICL_FOR_CLASS.get(out.error_class)
        if violations:
            err += "\n" + "\n".join(v.render() for v in violations)
            icl = "redefinition"
        ex, d = ctx.ask(item, render_refactor(_view(item, last_code), err, icl), "inner")
        try:
            candidate = extract_code(ex.response_text, item.includes)
        except NoCodeFound:
            candidate = None


def _synth(ctx: EngineContext, item: WorkItem, candidate: str | None, d) -> SynthResult:
    src = None if candidate is None else _prepare(ctx, item, candidate)
    tu = ctx.compose(item, src, None)
    if src is not None:
        targets = [n for n in src.order if n != "main"]
    else:
        targets = [n for n in ctx.design.order if n in ctx.owned(item)]
    ctx.hls_runs[item.function] += 1
    res = hls_synthesize(item, ctx.adapter, source=tu, targets=targets, workdir=d,
                         include_paths=ctx.include_paths)
    (d / "synth.log").write_text(res.tool_log)
    return res


def _accept(ctx: EngineContext, item: WorkItem, candidate: str | None) -> str:
    if candidate is not None:
        ctx.design.accept(item.function, _prepare(ctx, item, candidate), set(item.children))
    sig = child_signature(ctx.design, ctx.graph, item.function)
    pinned = ctx.consumed.get(item.function)
    if pinned is not None and " ".join(pinned.split()) != " ".join(sig.split()):
        raise PinnedSignatureViolation(item.function, pinned, sig)
    item.current_source = ctx.design.visible_code(item.function, item.members)
    return sig


def _evaluate_current(ctx: EngineContext, item: WorkItem) -> tuple[IterationOutcome, SynthResult | None]:
    """Iteration 0: the design's current code for the item, no prompt."""
    d = ctx.iter_dir(item.function, 0)
    test = item.unit_test.source_text if item.unit_test is not None else COMPILE_ONLY_MAIN
    tu = ctx.compose(item, None, test)
    (d / "candidate.c").write_text(item.current_source)
    run = ctx.build_and_test(item, tu, item.unit_test, d)
    out = IterationOutcome(digest_text(item.current_source), run.compile_ok, run.test_ok,
                           logs=(run.compile_log, run.test_log, ""))
    if not run.test_ok:
        out.error_class = ErrorClass.TestFailure if run.compile_ok else ErrorClass.CompileError
        return out, None
    res = _synth(ctx, item, None, d)
    out.synth_ok = res.ok
    out.logs = (run.compile_log, run.test_log, res.tool_log)
    return out, res


def run_outer(ctx: EngineContext, item: WorkItem) -> RefactorResult:
    """Drive one work item to a synthesizable source or raise BudgetExhausted."""
    ctx.policy.new_item()
    for c, s in zip(item.children, item.pinned_child_signatures):
        ctx.consumed.setdefault(c, s)
    result = RefactorResult(item.function, False, item.current_source)
    error, icl = "", None
    if item.stage != Stage.STREAMING:
        out0, res0 = _evaluate_current(ctx, item)
        result.outcomes.append(out0)
        if out0.synth_ok:
            result.done = True
            result.signature = _accept(ctx, item, None)
            result.final_source = item.current_source
            item.stage = Stage.OPTIMIZE
            return result
        if res0 is None:
            error = (out0.logs[0] + out0.logs[1]).strip()
        else:
            error, icl, _ = _route(res0)
    code = item.current_source
    for _ in range(ctx.budget.max_outer_iterations):
        if item.stage == Stage.STREAMING:
            kind, icl = "streaming", "streaming"
        else:
            kind = "refactor"
        request = render_refactor(_view(item, code), error, icl)
        ex, d = ctx.ask(item, request, kind)
        try:
            code = extract_code(ex.response_text, item.includes)
        except NoCodeFound:
            code = None
        try:
            out, code = run_inner(ctx, item, code, d)
        except BudgetExhausted as e:
            result.outcomes.append(e.last)
            record_failure(ctx.policy)
            error, icl = e.last.logs[0].strip(), None
            code = item.current_source if code is None else code
            continue
        result.outcomes.append(out)
        if not out.test_ok:
            record_failure(ctx.policy)
            error = (out.logs[1] or out.logs[0]).strip()
            icl = None
            continue
        d = ctx.iter_dir(item.function, ctx.prompt_index[(item.function, "iter")])
        verdict = None
        if item.stage == Stage.STREAMING:
            tu = ctx.compose(item, _prepare(ctx, item, code), None)
            verdict = detect_streaming_interface(item.function, tu)
            (d / "streaming.json").write_text(json.dumps(
                {"is_streaming": verdict.is_streaming, "reasons": verdict.reasons}, indent=2))
            result.streaming_verdict = verdict
        res = _synth(ctx, item, code, d)
        out.synth_ok = res.ok
        out.logs = (out.logs[0], out.logs[1], res.tool_log)
        _log_history(item, code, out)
        if verdict is not None:
            if verdict.is_streaming:
                # the answer's own main becomes the item's test from here on
                golden = item.unit_test.expected_stdout if item.unit_test else None
                item.unit_test = UnitTest(item.function, main_text(code), expected_stdout=golden)
                item.stage = Stage.REFACTOR
            elif res.ok and ctx.accept_nonstreaming:
                result.warnings.append("SynthesizableNonStreaming: " + "; ".join(verdict.reasons))
                golden = item.unit_test.expected_stdout if item.unit_test else None
                item.unit_test = UnitTest(item.function, main_text(code), expected_stdout=golden)
                item.stage = Stage.REFACTOR
            else:
                record_failure(ctx.policy)
                error = "The function is not a streaming function:\n" + "\n".join(verdict.reasons)
                if not res.ok:
                    error = _route(res)[0] + "\n" + error
                continue
        if not res.ok:
            record_failure(ctx.policy)
            error, icl, out.error_class = _route(res)
            continue
        record_success(ctx.policy)
        result.done = True
        result.signature = _accept(ctx, item, code)
        result.final_source = item.current_source
        result.prompts = len(item.history)
        item.stage = Stage.OPTIMIZE
        return result
    raise BudgetExhausted("outer", item.function, result.outcomes[-1] if result.outcomes else None)


def run_streaming_stage(ctx: EngineContext, item: WorkItem) -> RefactorResult:
    if item.stage != Stage.STREAMING:
        raise ValueError(f"{item.function} is not in the streaming stage")
    return run_outer(ctx, item)
