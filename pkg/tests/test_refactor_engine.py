"""Refactor loop behaviour driven through run_pipeline with scripted answers."""
import json
from pathlib import Path

import pytest

from hlsrefactor.harness.config import RunConfig
from hlsrefactor.harness.pipeline import ReferenceTestFailure, run_dir_for, run_pipeline
from hlsrefactor.hier.workitems import WorkItem
from hlsrefactor.llm.gateway import ModelPolicy, ScriptedBackend
from hlsrefactor.refactor.context import Budget
from hlsrefactor.refactor.engine import NO_CODE_ERROR, guard_child_signatures


def fenced(code: str) -> str:
    return f"Here you go:\n```c\n{code}\n```\n"


def make_run(tmp_path, src, top, test, **kw) -> RunConfig:
    (tmp_path / "d.c").write_text(src)
    (tmp_path / "t.c").write_text(test)
    cfg = RunConfig(tmp_path / "d.c", top, tmp_path / "t.c", out_dir=tmp_path / "runs", optimize="off")
    cfg.backend.kind = "scripted"
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


def prompts(cfg, fn):
    d = run_dir_for(cfg) / "work" / fn
    return sorted((p for p in d.glob("iter_*") if (p / "prompt.json").exists()), key=lambda p: int(p.name[5:]))


def user_text(p: Path) -> str:
    return json.loads((p / "prompt.json").read_text())["messages"][-1]["content"]


CLEAN = "#define N 4\nint add(int a[N]) {\n  int i, s = 0;\n  for (i = 0; i < N; i++) s += a[i];\n  return s;\n}\n"
CLEAN_TEST = '#include <stdio.h>\nint main(void) { int a[N] = {1, 2, 3, 4}; printf("%d\\n", add(a)); return 0; }\n'
WHILE = "#define N 4\nint add(int a[N]) {\n  int i = 0, s = 0;\n  while (i < N) { s += a[i]; i++; }\n  return s;\n}\n"


def test_clean_design_needs_no_prompt(tmp_path):
    cfg = make_run(tmp_path, CLEAN, "add", CLEAN_TEST)
    backend = ScriptedBackend([])
    rep = run_pipeline(cfg, backend=backend)
    assert rep.success and backend.calls == 0
    e = rep.per_function["add"]
    assert (e["iterations"], e["compile_runs"], e["hls_runs"]) == (0, 1, 1)


def test_no_code_answer_is_reprompted(tmp_path):
    cfg = make_run(tmp_path, WHILE, "add", CLEAN_TEST)
    rep = run_pipeline(cfg, backend=ScriptedBackend(["I am not sure what you mean.", fenced(CLEAN)]))
    assert rep.success
    ps = prompts(cfg, "add")
    assert len(ps) == 2
    assert "[UnboundedLoop]" in user_text(ps[0])
    assert NO_CODE_ERROR in user_text(ps[1])
    # an inner retry is a prompt but not an outer iteration
    assert rep.per_function["add"]["iterations"] == 1


def test_test_failure_feeds_back_the_diff(tmp_path):
    wrong = CLEAN.replace("s += a[i]", "s += 2 * a[i]")
    cfg = make_run(tmp_path, WHILE, "add", CLEAN_TEST)
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(wrong), fenced(CLEAN)]))
    assert rep.success
    second = user_text(prompts(cfg, "add")[1])
    assert "output differs from the reference run" in second and "expected:\n10" in second


def test_escalates_after_three_failures(tmp_path):
    cfg = make_run(tmp_path, WHILE, "add", CLEAN_TEST)
    cfg.policy = ModelPolicy(["small", "big"], 3)
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(WHILE)] * 3 + [fenced(CLEAN)]))
    assert rep.success
    models = [json.loads((p / "prompt.json").read_text())["model"] for p in prompts(cfg, "add")]
    assert models == ["small", "small", "small", "big"]
    assert rep.per_function["add"]["prompts_by_model"] == {"small": 3, "big": 1}


def test_budget_exhaustion_fails_cleanly(tmp_path):
    cfg = make_run(tmp_path, WHILE, "add", CLEAN_TEST)
    cfg.budgets = Budget(max_outer_iterations=2, max_inner_retries=1)
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(WHILE)]))
    assert not rep.success
    assert rep.per_function["add"]["status"] == "failed"
    assert any("BudgetExhausted" in e for e in rep.errors)
    assert (run_dir_for(cfg) / "report.json").exists()


def test_reference_must_pass(tmp_path):
    cfg = make_run(tmp_path, CLEAN, "add", "int main(void) { return 3; }\n")
    with pytest.raises(ReferenceTestFailure):
        run_pipeline(cfg, backend=ScriptedBackend([]))


HIER = """#define N 4
int scale(int x, int k) {
  int r = 0;
  while (k > 0) { r += x; k--; }
  return r;
}
int top(int a[N]) {
  int i, s = 0;
  for (i = 0; i < N; i++) s += scale(a[i], 3);
  return s;
}
"""
HIER_TEST = '#include <stdio.h>\nint main(void) { int a[N] = {1, 2, 3, 4}; printf("%d\\n", top(a)); return 0; }\n'
SCALE_OK = "int scale(int x, int k) {\n  int i, r = 0;\n  for (i = 0; i < 16; i++) if (i < k) r += x;\n  return r;\n}\n"


def test_hierarchy_bottom_up_with_pinned_child(tmp_path):
    cfg = make_run(tmp_path, HIER, "top", HIER_TEST)
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(SCALE_OK)]))
    assert rep.success, rep.errors
    assert rep.per_function["scale"]["iterations"] == 1
    assert rep.per_function["top"]["iterations"] == 0
    final = (run_dir_for(cfg) / "final" / "design.c").read_text()
    assert "i < 16" in final and "while" not in final
    # the child got a captured unit test rather than the top-level one
    assert "scale(" in user_text(prompts(cfg, "scale")[0]).split("also include a main function")[1]


def test_guard_flags_redefinition_and_arity():
    item = WorkItem(function="top", current_source="", pinned_child_signatures=["int scale(int x, int k)"],
                    includes=[], unit_test=None, children=["scale"])
    cand = "int scale(int x, int k) { return x * k; }\nint top(int a[4]) { return scale(a[0]); }\n"
    kinds = sorted(v.kind for v in guard_child_signatures(item, cand))
    assert kinds == ["redefinition", "signature"]
    assert guard_child_signatures(item, "int top(int a[4]) { return scale(a[0], 2); }\n") == []


def test_redefinition_is_routed_to_its_example(tmp_path):
    src = HIER.replace("while (k > 0) { r += x; k--; }", "r = x * k;").replace(
        "for (i = 0; i < N; i++) s += scale(a[i], 3);", "i = 0;\n  while (i < N) { s += scale(a[i], 3); i++; }")
    bad = "int top(int a[N]) {\n  int i, s = 0;\n  for (i = 0; i < N; i++) s += scale(a[i]);\n  return s;\n}\n"
    good = bad.replace("scale(a[i])", "scale(a[i], 3)")
    cfg = make_run(tmp_path, src, "top", HIER_TEST)
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(bad), fenced(good)]))
    assert rep.success, rep.errors
    retry = user_text(prompts(cfg, "top")[1])
    assert "calls 'scale' with 1 arguments" in retry
    from hlsrefactor.prompts.library import icl_asset
    assert icl_asset("redefinition").text in retry


STREAM_SRC = "#define N 8\nint x[N];\nvoid acc(int *y) {\n  int i, s = 0;\n  for (i = 0; i < N; i++) s += x[i];\n  *y = s;\n}\n"
STREAM_TEST = ('#include <stdio.h>\nint main(void) { int i, y; for (i = 0; i < N; i++) x[i] = i;'
               ' acc(&y); printf("%d\\n", y); return 0; }\n')
STREAM_MAIN = ('#include <stdio.h>\nint main(void) { int i, y = 0; for (i = 0; i < N; i++) acc(&y, i);'
               ' printf("%d\\n", y); return 0; }\n')


def test_streaming_non_streaming_answer_is_accepted_with_warning(tmp_path):
    batch = ("#define N 8\nint buf[N];\nvoid acc(int *y, int unused) {\n  int i, s = 0;\n"
             "  for (i = 0; i < N; i++) { buf[i] = i; s += buf[i]; }\n  *y = s;\n}\n")
    cfg = make_run(tmp_path, STREAM_SRC, "acc", STREAM_TEST, streaming=True)
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(batch + STREAM_MAIN)]))
    assert rep.success, rep.errors
    e = rep.per_function["acc"]
    assert e["streaming_verdict"] is False
    assert e["warnings"] and e["warnings"][0].startswith("SynthesizableNonStreaming")


def test_streaming_rejected_when_warnings_disabled(tmp_path):
    batch = ("#define N 8\nvoid acc(int *y, int unused) {\n  int i, s = 0;\n"
             "  for (i = 0; i < N; i++) s += i;\n  *y = s;\n}\n")
    stream = ("#define N 8\nvoid acc(int *y, int v) {\n  static int s = 0;\n  s += v;\n  *y = s;\n}\n")
    cfg = make_run(tmp_path, STREAM_SRC, "acc", STREAM_TEST, streaming=True, accept_nonstreaming=False)
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(batch + STREAM_MAIN), fenced(stream + STREAM_MAIN)]))
    assert rep.success, rep.errors
    assert rep.per_function["acc"]["streaming_verdict"] is True
    assert "not a streaming function" in user_text(prompts(cfg, "acc")[1])
