import sys

import pytest
from hypothesis import given, strategies as st

from hlsrefactor.hier.workitems import WorkItem
from hlsrefactor.synth.adapter import AdapterConfig, AdapterFailure, hls_synthesize, parse_tool_log
from hlsrefactor.synth.lint import LintCategory
from hlsrefactor.synth.pragmas import PragmaKind, scored, strip_pragmas, verify_pragmas

LOOP = "void f(int a[8]) {\n  int i;\n  %s\n  for (i = 0; i < 8; i++)\n    a[i] = i;\n}\n"


@pytest.mark.parametrize("line,kind,arg,ok", [
    ("#pragma hls_unroll yes", PragmaKind.Unroll, "yes", True),
    ("#pragma hls_unroll 4", PragmaKind.Unroll, "4", True),
    ("#pragma hls_unroll 0", PragmaKind.Unroll, "0", False),
    ("#pragma hls_pipeline_init_interval 1", PragmaKind.PipelineInitInterval, "1", True),
    ("#pragma hls_pipeline_init_interval x", PragmaKind.PipelineInitInterval, "x", False),
    ("#pragma unroll_hls 4", PragmaKind.Unroll, "4", False),
    ("#pragma HLS UNROLL", PragmaKind.Unroll, "UNROLL", False),
    ("#pragma hls_array_partition", PragmaKind.ArrayPartition, "", True),
])
def test_pragma_classification(line, kind, arg, ok):
    (d,) = verify_pragmas(LOOP % line)
    assert (d.kind, d.argument, d.recognized) == (kind, arg, ok)
    assert d.loop_location == 4


def test_pragmas_in_comments_and_other_pragmas_are_ignored():
    src = "#pragma once\n// #pragma hls_unroll yes\n/* #pragma hls_unroll 2 */\nint x;\n"
    assert verify_pragmas(src) == []


def test_scored_and_strip():
    src = LOOP % "#pragma hls_unroll yes\n  #pragma unroll_hls 2"
    ds = verify_pragmas(src)
    assert len(ds) == 2 and len(scored(ds)) == 1
    assert verify_pragmas(strip_pragmas(src)) == []


@given(st.integers(min_value=1, max_value=10**6))
def test_any_positive_unroll_factor_is_recognized(n):
    (d,) = verify_pragmas(LOOP % f"#pragma hls_unroll {n}")
    assert d.recognized


def _item(src, fn="f"):
    return WorkItem(function=fn, current_source=src, pinned_child_signatures=[], includes=[], unit_test=None)


def test_lint_adapter_dedupes_over_targets(tmp_path):
    src = "int g(int n) { return n ? g(n - 1) : 0; }\nint f(int n) { return g(n); }\n"
    res = hls_synthesize(_item(src), AdapterConfig(), targets=["f", "g", "g"], workdir=tmp_path)
    assert not res.ok
    assert [d.category for d in res.diagnostics] == [LintCategory.Recursion]
    assert (tmp_path / "synth.log").read_text() == res.tool_log


def _cmd(script: str, **kw) -> AdapterConfig:
    return AdapterConfig.from_dict({"adapter": "command", "command": {"cmd": [sys.executable, "-c", script, "{src}", "{top}"], **kw}})


def test_command_adapter_ok_and_reject(tmp_path):
    ok = hls_synthesize(_item("int f(void){return 0;}"), _cmd("print('done')"), workdir=tmp_path)
    assert ok.ok and ok.adapter == "command"
    rej = hls_synthesize(_item("int f(void){return 0;}"),
                         _cmd("import sys; print('candidate.c:3:1: error: recursive function call not supported'); sys.exit(1)"),
                         workdir=tmp_path)
    assert not rej.ok
    assert rej.diagnostics[0].category == LintCategory.Recursion
    assert rej.diagnostics[0].location == (3, 1)
    assert rej.diagnostics[0].icl_key == "recursion"


def test_command_adapter_substitutes_placeholders(tmp_path):
    res = hls_synthesize(_item("int top_fn(void){return 0;}", "top_fn"),
                         _cmd("import sys; print(open(sys.argv[1]).read()); print(sys.argv[2])"), workdir=tmp_path)
    assert "top_fn" in res.tool_log.splitlines()[-1]


def test_command_adapter_errors(tmp_path):
    with pytest.raises(AdapterFailure) as e:
        hls_synthesize(_item("x"), _cmd("import sys; sys.exit(5)"), workdir=tmp_path)
    assert e.value.exit_code == 5
    cfg = AdapterConfig.from_dict({"adapter": "command", "command": {"cmd": ["/no/such/tool"]}})
    with pytest.raises(AdapterFailure) as e:
        hls_synthesize(_item("x"), cfg, workdir=tmp_path)
    assert e.value.exit_code == 127


def test_custom_error_regexes():
    cfg = AdapterConfig.from_dict({"adapter": "command", "command": {
        "cmd": ["true"], "error_regexes": [{"pattern": "BAD_MEM", "category": "DynamicMemory"}]}})
    d = parse_tool_log("info: start\nError: BAD_MEM at line 3\n", cfg)
    assert d.category == LintCategory.DynamicMemory


def test_unknown_adapter():
    with pytest.raises(ValueError):
        AdapterConfig.from_dict({"adapter": "vivado"})
