"""End-to-end run: hierarchy preprocessing, refactoring, optimization."""

from __future__ import annotations

import json
import logging
import shutil
import time
from pathlib import Path

from hlsrefactor.cfront import build_call_graph, load_unit
from hlsrefactor.design import Design
from hlsrefactor.hier.capture import (
    CaptureFailure,
    calls_for,
    capture_instrumented,
    capture_session,
    write_captures,
)
from hlsrefactor.hier.order import work_units
from hlsrefactor.hier.testgen import UnitTest, synthesize_unit_test
from hlsrefactor.hier.workitems import Stage, WorkItem, child_signature, make_work_items
from hlsrefactor.harness.config import RunConfig, load_yaml
from hlsrefactor.harness.report import AggregateStats, RunReport, aggregate, emit_report, empty_function_entry
from hlsrefactor.llm.gateway import BackendError, Gateway, ModelPolicy, ReplayMiss, UsageLedger, make_backend
from hlsrefactor.pragma.engine import optimize
from hlsrefactor.refactor.context import BudgetExhausted, EngineContext
from hlsrefactor.refactor.engine import PinnedSignatureViolation, run_outer
from hlsrefactor.synth.adapter import AdapterFailure
from hlsrefactor.toolchain import Toolchain, run_program

log = logging.getLogger(__name__)


class ReferenceTestFailure(RuntimeError):
    def __init__(self, log_text: str):
        super().__init__("the reference test does not pass on the unmodified source")
        self.log = log_text


def run_dir_for(cfg: RunConfig, repeat: int = 0) -> Path:
    return Path(cfg.out_dir) / f"run_{cfg.digest()[:12]}_r{repeat}"


def reference_run(cfg: RunConfig, toolchain: Toolchain, d: Path) -> str:
    """Compile and run the user test against the original source; returns its stdout."""
    raw = Path(cfg.src).read_text()
    test = Path(cfg.test).read_text()
    src = d / "reference_tu.c"
    src.write_text(raw.rstrip("\n") + '\n#line 1 "test.c"\n' + test)
    res = toolchain.compile(src, d / "reference", extra_flags=[f"-I{Path(cfg.src).resolve().parent}"])
    if not res.ok:
        raise ReferenceTestFailure(res.log)
    run = run_program(d / "reference", cfg.budgets.test_timeout, cwd=d)
    (d / "reference.log").write_text(run.log)
    (d / "reference").unlink(missing_ok=True)
    if not run.ok:
        raise ReferenceTestFailure(run.log)
    return run.stdout


def unit_tests(cfg, unit, graph, toolchain, d: Path, notes: list[str]) -> dict[str, UnitTest | None]:
    """Captured unit tests for every non-top work unit."""
    reps = [wu.name for wu in work_units(graph) if graph.top not in wu.members]
    tests: dict[str, UnitTest | None] = {}
    if not reps:
        return tests
    test_text = Path(cfg.test).read_text()
    cap_dir = d / "capture"
    try:
        if cfg.capture == "debugger":
            sess = capture_session(unit, test_text, reps, cap_dir, toolchain=toolchain)
            calls, plans, failures = sess.calls, sess.plans, dict(sess.failures)
        else:
            calls = capture_instrumented(unit, test_text, reps, cap_dir, toolchain=toolchain)
            from hlsrefactor.hier.capture import build_plans

            plans, failures = build_plans(unit, reps)
    except CaptureFailure as e:
        notes.append(f"CaptureFailure: {e}")
        return {r: None for r in reps}
    write_captures(calls, cap_dir / "captures.jsonl")
    for r in reps:
        mine = calls_for(calls, r)
        if r in failures:
            notes.append(f"CaptureFailure: {r}: {failures[r]}")
            tests[r] = None
        elif not mine:
            notes.append(f"CoverageGap: {r} is never called by the test")
            tests[r] = None
        else:
            tests[r] = synthesize_unit_test(graph.functions[r], mine, cfg.max_cases, plan=plans[r])
            (cap_dir / f"test_{r}.c").write_text(tests[r].source_text)
    return tests


def _usage(entry: dict, exchanges) -> None:
    for ex in exchanges:
        for key, v in (("prompts_by_model", 1), ("input_tokens_by_model", ex.input_tokens),
                       ("output_tokens_by_model", ex.output_tokens)):
            entry[key][ex.model_id] = entry[key].get(ex.model_id, 0) + v


def _integrated_item(ctx: EngineContext, top_item: WorkItem) -> WorkItem:
    names = list(ctx.design.order)
    for n in names:
        ctx.design.entries[n].owner = top_item.function
    return WorkItem(
        function=top_item.function,
        current_source=ctx.design.visible_code(top_item.function, names),
        pinned_child_signatures=[],
        includes=list(ctx.design.includes),
        unit_test=top_item.unit_test,
        stage=Stage.OPTIMIZE,
        members=names,
        history=top_item.history,
        is_top=True,
    )


def run_pipeline(cfg: RunConfig, repeat: int = 0, backend=None) -> RunReport:
    """One run; everything lands under ``run_dir_for(cfg, repeat)``."""
    cfg.validate(need_backend=backend is None)
    t0 = time.monotonic()
    d = run_dir_for(cfg, repeat).resolve()
    if d.exists():
        shutil.rmtree(d)
    d.mkdir(parents=True)
    toolchain = Toolchain.from_config(cfg.toolchain)
    src_dir = str(Path(cfg.src).resolve().parent)
    report = RunReport(False, benchmark=cfg.label)

    golden = reference_run(cfg, toolchain, d)
    unit, funcs = load_unit(cfg.src, [src_dir])
    graph = build_call_graph(funcs, cfg.top)
    notes: list[str] = []
    tests = unit_tests(cfg, unit, graph, toolchain, d, notes)
    tests[cfg.top] = UnitTest(cfg.top, Path(cfg.test).read_text(), expected_stdout=golden)

    design = Design.from_text(unit.raw_text)
    for wu in work_units(graph):
        for m in wu.members:
            design.entries[m].owner = wu.name
    items = make_work_items(graph, unit, tests, design, streaming=cfg.streaming)

    if backend is None:
        script = load_yaml(cfg.script).get("responses") if cfg.script else None
        backend = make_backend(cfg.backend, script)
    transcript = d / "transcript.jsonl"
    transcript.write_text("")
    ledger = UsageLedger(rates=dict(cfg.backend.rates))
    policy = ModelPolicy(list(cfg.policy.ladder), cfg.policy.escalation_threshold, persist=cfg.policy.persist)
    ctx = EngineContext(design, graph, Gateway(backend, ledger, transcript), policy, cfg.adapter, cfg.budgets,
                        toolchain, d / "work", [src_dir], cfg.accept_nonstreaming)

    for it in items:
        report.per_function[it.function] = empty_function_entry()
        report.per_function[it.function]["notes"] = list(it.notes)
    report.errors.extend(notes)

    ok = True
    opt_results = {}
    for it in items:
        entry = report.per_function[it.function]
        it.pinned_child_signatures = [child_signature(design, graph, c) for c in it.children]
        it.current_source = design.visible_code(it.function, it.members)
        mark = len(ledger.exchanges)
        try:
            res = run_outer(ctx, it)
            entry["status"] = "done"
            entry["warnings"] = res.warnings
            if res.streaming_verdict is not None:
                entry["streaming_verdict"] = res.streaming_verdict.is_streaming
            if cfg.optimize == "per_function":
                o = optimize(ctx, it, cfg.target, cfg.strict_pragma_only)
                opt_results[it.function] = o
        except (BudgetExhausted, PinnedSignatureViolation, ReplayMiss, BackendError, AdapterFailure) as e:
            entry["status"] = "failed"
            report.errors.append(f"{it.function}: {type(e).__name__}: {e}")
            ok = False
        entry["iterations"] = it.iteration
        entry["compile_runs"] = ctx.compile_runs[it.function]
        entry["hls_runs"] = ctx.hls_runs[it.function]
        _usage(entry, ledger.exchanges[mark:])
        if not ok:
            break

    if ok and cfg.optimize == "integrated":
        top_item = next(i for i in items if i.is_top)
        mark = len(ledger.exchanges)
        try:
            opt_results[cfg.top] = optimize(ctx, _integrated_item(ctx, top_item), cfg.target, cfg.strict_pragma_only)
        except (ReplayMiss, BackendError, AdapterFailure) as e:
            report.errors.append(f"{cfg.top}: optimize: {type(e).__name__}: {e}")
        entry = report.per_function[cfg.top]
        entry["compile_runs"] = ctx.compile_runs[cfg.top]
        entry["hls_runs"] = ctx.hls_runs[cfg.top]
        _usage(entry, ledger.exchanges[mark:])

    for fn, o in opt_results.items():
        report.per_function[fn]["optimization"] = {
            "directives": [[x.kind.value, x.argument, x.recognized] for x in o.directives],
            "unrecognized_count": o.unrecognized_count,
            "behavior_preserved": o.behavior_preserved,
            "iterations": o.iterations,
            "notes": o.notes,
        }

    final = d / "final"
    final.mkdir()
    (final / "design.c").write_text(design.full_text())
    for it in items:
        if it.function in design.entries:
            p = final / f"{it.function}.c"
            p.write_text(design.visible_code(it.function, it.members) + "\n")
            report.per_function[it.function]["final_source_path"] = str(p.relative_to(d))

    if ok:
        ok = _integration_check(ctx, items, d, report)
    report.success = ok
    report.cost = round(ledger.cost(), 10)
    report.compute_totals()
    report.wall_time = time.monotonic() - t0
    (d / "report.json").write_bytes(emit_report(report, "json"))
    (d / "timing.json").write_text(json.dumps({"wall_time": report.wall_time}) + "\n")
    return report


def _integration_check(ctx: EngineContext, items, d: Path, report: RunReport) -> bool:
    """The accepted design as a whole against the top item's test."""
    top = next(i for i in items if i.is_top)
    if top.unit_test is None:
        return True
    src = d / "final" / "integration.c"
    src.write_text(ctx.design.full_text().rstrip("\n") + '\n#line 1 "test.c"\n' + top.unit_test.source_text)
    res = ctx.toolchain.compile(src, d / "final" / "integration", extra_flags=[f"-I{p}" for p in ctx.include_paths])
    if not res.ok:
        report.errors.append("integration: compile failed\n" + res.log)
        return False
    run = run_program(d / "final" / "integration", ctx.budget.test_timeout, cwd=d / "final")
    (d / "final" / "integration.log").write_text(run.log)
    (d / "final" / "integration").unlink(missing_ok=True)
    exp = top.unit_test.expected_stdout
    if not run.ok or (exp is not None and run.stdout != exp):
        report.errors.append("integration: the accepted design fails the top-level test")
        return False
    return True


def run_benchmark_suite(cfgs: list[RunConfig], repeats: int, backend_factory=None) -> list[AggregateStats]:
    """``repeats`` fresh runs per config, aggregated per benchmark."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    out = []
    for cfg in cfgs:
        reports = []
        for k in range(repeats):
            backend = backend_factory(cfg, k) if backend_factory else None
            try:
                reports.append(run_pipeline(cfg, k, backend))
            except ReferenceTestFailure as e:
                r = RunReport(False, benchmark=cfg.label, errors=[str(e)])
                r.compute_totals()
                reports.append(r)
        out.append(aggregate(reports, cfg.label))
    return out
