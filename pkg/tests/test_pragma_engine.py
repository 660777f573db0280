import json

import pytest

from hlsrefactor.harness.pipeline import run_dir_for, run_pipeline
from hlsrefactor.hier.testgen import UnitTest
from hlsrefactor.llm.gateway import ScriptedBackend
from hlsrefactor.pragma.engine import CompileError, OptimizationTarget, diff_semantics
from hlsrefactor.refactor.context import Budget

from test_refactor_engine import CLEAN, CLEAN_TEST, fenced, make_run

TEST = UnitTest("add", "#include <stdio.h>\nint main(void) { int a[4] = {1, 2, 3, 4}; return add(a) != 10; }\n")
PRAGMA_OK = CLEAN.replace("  for (i", "  #pragma hls_unroll yes\n  for (i")


def test_diff_semantics(tmp_path):
    assert diff_semantics(CLEAN, PRAGMA_OK, TEST, workdir=tmp_path)
    broken = PRAGMA_OK.replace("s += a[i]", "s += a[i] + 1")
    assert not diff_semantics(CLEAN, broken, TEST, workdir=tmp_path)
    with pytest.raises(CompileError):
        diff_semantics("int add(int a[4]) { return }", PRAGMA_OK, TEST, workdir=tmp_path)


def _opt_run(tmp_path, answers, **kw):
    cfg = make_run(tmp_path, CLEAN, "add", CLEAN_TEST, optimize="per_function", **kw)
    rep = run_pipeline(cfg, backend=ScriptedBackend(answers))
    return cfg, rep


def test_optimize_accepts_first_passing_answer(tmp_path):
    cfg, rep = _opt_run(tmp_path, [fenced(PRAGMA_OK)])
    o = rep.per_function["add"]["optimization"]
    assert rep.success and o["iterations"] == 1
    assert o["directives"] == [["Unroll", "yes", True]]
    assert "#pragma hls_unroll yes" in (run_dir_for(cfg) / "final" / "design.c").read_text()
    d = run_dir_for(cfg) / "work" / "add" / "opt_iter_1"
    assert (d / "tu.c").exists() and (d / "tu_nopragma.c").exists()


def test_optimize_retry_is_a_conversation(tmp_path):
    wrong = PRAGMA_OK.replace("s += a[i]", "s -= a[i]")
    cfg, rep = _opt_run(tmp_path, [fenced(wrong), fenced(PRAGMA_OK)])
    assert rep.per_function["add"]["optimization"]["iterations"] == 2
    msgs = json.loads((run_dir_for(cfg) / "work" / "add" / "opt_iter_2" / "prompt.json").read_text())["messages"]
    assert [m["role"] for m in msgs] == ["system", "user", "assistant", "user"]
    assert msgs[-1]["content"].startswith("The current problem is:\n")


def test_strict_mode_rejects_code_changes(tmp_path):
    restructured = PRAGMA_OK.replace("s += a[i];", "{ s = s + a[i]; }")
    cfg, rep = _opt_run(tmp_path, [fenced(restructured), fenced(PRAGMA_OK)], strict_pragma_only=True)
    assert rep.per_function["add"]["optimization"]["iterations"] == 2
    retry = json.loads((run_dir_for(cfg) / "work" / "add" / "opt_iter_2" / "prompt.json").read_text())
    assert "only add pragmas" in retry["messages"][-1]["content"]


def test_optimize_falls_back_when_budget_runs_out(tmp_path):
    wrong = PRAGMA_OK.replace("s += a[i]", "s -= a[i]")
    cfg, rep = _opt_run(tmp_path, [fenced(wrong)], budgets=Budget(max_outer_iterations=2))
    o = rep.per_function["add"]["optimization"]
    assert rep.success
    assert o["notes"] == ["NoOptimization"] and o["directives"] == []
    assert "pragma" not in (run_dir_for(cfg) / "final" / "design.c").read_text()


def test_integrated_mode_optimizes_once_from_the_top(tmp_path):
    from test_refactor_engine import HIER, HIER_TEST, SCALE_OK
    top_opt = ("int top(int a[N]) {\n  int i, s = 0;\n  #pragma hls_pipeline_init_interval 1\n"
               "  for (i = 0; i < N; i++) s += scale(a[i], 3);\n  return s;\n}\n")
    cfg = make_run(tmp_path, HIER, "top", HIER_TEST, optimize="integrated")
    rep = run_pipeline(cfg, backend=ScriptedBackend([fenced(SCALE_OK), fenced(SCALE_OK + top_opt)]))
    assert rep.success, rep.errors
    assert "optimization" not in rep.per_function["scale"]
    assert rep.per_function["top"]["optimization"]["directives"] == [["PipelineInitInterval", "1", True]]


def test_targets():
    assert OptimizationTarget("area") is OptimizationTarget.Area
    with pytest.raises(ValueError):
        OptimizationTarget("power")
