"""The ten acceptance criteria, each timed against its runtime limit.

Run under pytest (a summary line per criterion is printed at the end of the
session) or directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import json
import random
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import E2E, FIX, PRAGMA, capture_both, compile_and_run, load_cfg, paper_listing  # noqa: E402

RESULTS: list[str] = []


# ---- criteria ----------------------------------------------------------------

def lint_taxonomy(tmp: Path) -> str:
    from hlsrefactor.synth.lint import LintCategory, lint_file, top_comment

    files = sorted((FIX / "lint").glob("*.c"))
    bad = clean = 0
    per_cat = {c: 0 for c in LintCategory}
    for p in files:
        res = lint_file(p, top_comment(p.read_text()))
        stem = p.stem.rsplit("_", 1)[0]
        if stem == "clean":
            assert res.ok, f"{p.name} flagged: {res.tool_log}"
            clean += 1
        else:
            want = LintCategory(next(c.value for c in LintCategory if c.value.lower() == stem))
            assert res.diagnostics and all(d.category == want for d in res.diagnostics), f"{p.name}: {res.tool_log}"
            bad += 1
            per_cat[want] += 1
    assert bad >= 16 and clean >= 6 and min(per_cat.values()) >= 2
    assert "arr = (int *)malloc(x * sizeof(int));" in (FIX / "lint" / "dynamicmemory_1.c").read_text()
    assert "else return n * factorial(n - 1);" in (FIX / "lint" / "recursion_1.c").read_text()
    return f"{bad} forbidden flagged with the right category, {clean} clean unflagged"


def streaming_classifier(tmp: Path) -> str:
    from hlsrefactor.synth.lint import top_comment
    from hlsrefactor.synth.streaming import detect_streaming_interface

    files = sorted((FIX / "streaming").glob("*.c"))
    assert len(files) == 6
    for p in files:
        text = p.read_text()
        want = "// expect: streaming" in text
        got = detect_streaming_interface(top_comment(text), text, p.name).is_streaming
        assert got == want, p.name
    return "6/6 fixtures match their labels"


def capture_fidelity(tmp: Path) -> str:
    unit, reps, sess, inst, tests = capture_both(tmp)
    assert not sess.failures and set(tests) == set(reps)
    assert [c.to_json() for c in sess.calls] == [c.to_json() for c in inst]
    for fn, t in tests.items():
        ok, _, log = compile_and_run(unit.raw_text + "\n" + t.source_text, tmp, f"ut_{fn}")
        assert ok, f"{fn}: {log}"
    return f"{len(tests)} unit tests pass, {len(sess.calls)} captured calls identical to instrumentation"


def escalation_policy(tmp: Path) -> str:
    from hlsrefactor.llm.gateway import ModelPolicy, record_failure, record_success, select_model

    rng = random.Random(20240601)
    for _ in range(50):
        ladder = [f"m{k}" for k in range(rng.randint(1, 4))]
        outcomes = [rng.random() < 0.35 for _ in range(rng.randint(0, 40))]
        p = ModelPolicy(list(ladder), 3)
        rung, streak = 0, 0
        for ok in outcomes:
            assert select_model(p) == ladder[rung]
            if ok:
                record_success(p)
                streak = 0
            else:
                record_failure(p)
                streak += 1
                if streak == 3:
                    rung, streak = min(rung + 1, len(ladder) - 1), 0
        assert p.rung == rung and p.failures_at_current == streak
    return "50 random sequences match the hand-stepped oracle"


def ledger_conservation(tmp: Path) -> str:
    from hlsrefactor.llm.gateway import (
        ModelPolicy, PromptExchange, ReplayBackend, UsageLedger, append_transcript, complete, read_transcript,
    )

    rng = random.Random(7)
    for k in range(120):
        path = tmp / f"t{k}.jsonl"
        for j in range(rng.randint(0, 12)):
            req = [{"role": "system", "content": "s"}, {"role": "user", "content": f"q{rng.randint(0, 5)}"}]
            append_transcript(path, PromptExchange(req, rng.choice(["a", "b"]), f"r{j}",
                                                   rng.randint(0, 10**5), rng.randint(0, 10**5)))
        exs = read_transcript(path) if path.exists() else []
        backend, ledger = ReplayBackend(exs), UsageLedger()
        for ex in exs:
            complete(ex.request, ModelPolicy([ex.model_id]), backend, ledger)
        t = ledger.totals()
        assert (t.prompts, t.input_tokens, t.output_tokens) == (
            len(exs), sum(e.input_tokens for e in exs), sum(e.output_tokens for e in exs))
    return "120 random transcripts conserve prompts and tokens"


def e2e_replay(tmp: Path) -> str:
    from hlsrefactor.design import Design
    from hlsrefactor.harness.pipeline import run_dir_for, run_pipeline
    from hlsrefactor.synth.lint import lint
    from hlsrefactor.synth.streaming import detect_streaming_interface

    for name, path in E2E.items():
        cfg = load_cfg(path, tmp / name)
        rep = run_pipeline(cfg)
        assert rep.success, f"{name}: {rep.errors}"
        d = run_dir_for(cfg)
        first = (d / "report.json").read_bytes()
        final = (d / "final" / "design.c").read_text()
        for fn in Design.from_text(final).order:
            res = lint(final, fn, include_paths=[str(Path(cfg.src).parent)])
            assert res.ok, f"{name}/{fn}: {res.tool_log}"
        # the user's test (or for streaming the frozen answer test) against the final design
        ok, out, log = compile_and_run(final + "\n" + Path(d / "final" / "integration.c").read_text().split(
            '#line 1 "test.c"\n', 1)[1], tmp, f"final_{name}")
        golden = (d / "reference.log")
        assert ok, f"{name}: {log}"
        if name == "streaming":
            assert detect_streaming_interface(cfg.top, final).is_streaming
        else:
            ok, ref_out, _ = compile_and_run(final + "\n" + Path(cfg.test).read_text(), tmp, f"user_{name}")
            assert ok and golden.exists()
        run_pipeline(cfg)
        assert (d / "report.json").read_bytes() == first, f"{name}: report.json changed on re-run"
    return "3/3 fixtures converge; final sources lint-clean and pass their tests; reports byte-identical"


def pragma_stage(tmp: Path) -> str:
    from hlsrefactor.harness.pipeline import run_dir_for, run_pipeline

    cfg = load_cfg(PRAGMA["latency"], tmp / "lat")
    o = run_pipeline(cfg).per_function["add_round_key"]["optimization"]
    rec = [x for x in o["directives"] if x[2]]
    assert sorted(x[0] for x in rec) == ["PipelineInitInterval", "Unroll"] and o["behavior_preserved"]
    cfg = load_cfg(PRAGMA["misspelled"], tmp / "mis")
    o = run_pipeline(cfg).per_function["add_round_key"]["optimization"]
    assert o["unrecognized_count"] == 1 and o["behavior_preserved"]
    # the behaviour gate rejected the first, miscomputing answer before accepting the second
    w = run_dir_for(cfg) / "work" / "add_round_key"
    assert "output differs" in (w / "opt_iter_1" / "test.log").read_text()
    assert o["iterations"] == 2 and (w / "opt_iter_2" / "tu_nopragma.c").exists()
    return "latency: 2 recognized, behaviour kept; misspelled: 1 unrecognized, gate enforced"


def prompt_fidelity(tmp: Path) -> str:
    from hlsrefactor.prompts.library import ICL_FOR_CLASS, ICL_KEYS, ErrorClass, icl_asset, render_system
    from hlsrefactor.synth.lint import ICL_KEYS as LINT_ICL, LintCategory

    assert render_system("refactor") == paper_listing("You are a C and High-Level Synthesis (HLS) expert. \nAssist")
    assert render_system("optimize") == paper_listing("You are a C and High-Level Synthesis (HLS) expert. Assist in")
    for k in ICL_KEYS:
        assert icl_asset(k).text == paper_listing(icl_asset(k).text[:60]), k
    routed = {ICL_FOR_CLASS[ErrorClass.SynthRecursion], ICL_FOR_CLASS[ErrorClass.SynthPointer],
              ICL_FOR_CLASS[ErrorClass.SynthFloat], ICL_FOR_CLASS[ErrorClass.SynthRedefinition],
              LINT_ICL[LintCategory.UnboundedLoop]}
    assert routed == set(ICL_KEYS)
    return "2 system prompts byte-identical; 5 ICL assets verbatim and routed"


def stats_aggregation(tmp: Path) -> str:
    from hlsrefactor.harness.report import RunReport, aggregate, emit_stats, empty_function_entry

    big = [13, 24, 18, 19, 17, 20, 16, 19]  # gpt-4o prompts of the 8 successful runs
    small = [5, 9, 7, 6, 8, 7, 6, 6]
    reports = []
    for k in range(10):
        e = empty_function_entry()
        ok = k < 8
        b, s = (big[k], small[k]) if ok else (30, 12)
        e["prompts_by_model"] = {"gpt-4o": b, "gpt-4o-mini": s}
        e["input_tokens_by_model"] = {"gpt-4o": 4000 * b + k, "gpt-4o-mini": 3000 * s}
        e["output_tokens_by_model"] = {"gpt-4o": 1300 * b, "gpt-4o-mini": 1200 * s + 3 * k}
        e["compile_runs"], e["hls_runs"] = b + s + k, b
        r = RunReport(ok, {"Cipher": e}, benchmark="AES")
        r.compute_totals()
        reports.append(r)
    st = aggregate(reports)
    assert st.success_rate == 80.0
    assert st.prompts_by_model["gpt-4o"] == (18.25, 13, 24)  # published AES row
    assert st.prompts_by_model["gpt-4o-mini"] == (6.75, 5, 9)

    def oracle(xs):
        return (float(Fraction(sum(xs), len(xs))), min(xs), max(xs))

    ok = reports[:8]
    for key in ("prompts_by_model", "input_tokens_by_model", "output_tokens_by_model"):
        for m in ("gpt-4o", "gpt-4o-mini"):
            assert getattr(st, key)[m] == oracle([r.per_function["Cipher"][key][m] for r in ok]), (key, m)
    assert st.compile_runs == oracle([r.per_function["Cipher"]["compile_runs"] for r in ok])
    assert "80" in emit_stats([st], "csv").decode().splitlines()[1].split(",")[1]
    return "Succ. 80%, every (avg, min, max) equals the exact oracle"


def counter_ordering(tmp: Path) -> str:
    from hlsrefactor.harness.pipeline import run_pipeline

    n = 0
    for name, path in {**E2E, **{f"pragma_{k}": v for k, v in PRAGMA.items()}}.items():
        rep = run_pipeline(load_cfg(path, tmp / name))
        for fn, e in rep.per_function.items():
            assert e["compile_runs"] >= e["hls_runs"], (name, fn, e)
            n += 1
    return f"compile_runs >= hls_runs for all {n} functions over 6 replay fixtures"


CRITERIA = [
    ("lint taxonomy", lint_taxonomy, 5.0),
    ("streaming classifier", streaming_classifier, 1.0),
    ("unit-test capture fidelity", capture_fidelity, 60.0),
    ("escalation policy", escalation_policy, 1.0),
    ("ledger conservation", ledger_conservation, 5.0),
    ("end-to-end replay convergence", e2e_replay, 120.0),
    ("pragma stage", pragma_stage, 30.0),
    ("prompt fidelity", prompt_fidelity, 1.0),
    ("stats aggregation", stats_aggregation, 1.0),
    ("counter ordering", counter_ordering, None),
]


def run_criterion(name, fn, limit, tmp: Path) -> tuple[bool, str]:
    t0 = time.perf_counter()
    try:
        detail = fn(tmp)
        ok = True
    except AssertionError as e:
        ok, detail = False, f"assertion failed: {e}"
    dt = time.perf_counter() - t0
    if ok and limit is not None and dt >= limit:
        ok, detail = False, f"too slow: {dt:.2f}s >= {limit:g}s"
    bound = f" (limit {limit:g}s)" if limit is not None else ""
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {dt:.2f}s{bound} - {detail}"
    RESULTS.append(line)
    return ok, line


@pytest.mark.parametrize("name,fn,limit", CRITERIA, ids=[c[0].replace(" ", "_") for c in CRITERIA])
def test_criterion(name, fn, limit, tmp_path):
    ok, line = run_criterion(name, fn, limit, tmp_path)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for name, fn, limit in CRITERIA:
        with tempfile.TemporaryDirectory() as d:
            ok, line = run_criterion(name, fn, limit, Path(d))
        print(line, flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
