from dataclasses import dataclass, field

import pytest
from hypothesis import given, strategies as st

from hlsrefactor.hier.testgen import UnitTest
from hlsrefactor.prompts.library import (
    ICL_FOR_CLASS,
    ICL_KEYS,
    TRUNCATION_MARKER,
    ErrorClass,
    MissingBinding,
    NoCodeFound,
    PromptRole,
    PromptTemplate,
    classify_error,
    extract_code,
    icl_asset,
    load_template,
    render_optimize,
    render_refactor,
    render_system,
    render_template,
)
from hlsrefactor.synth.lint import ICL_KEYS as LINT_ICL, LintCategory

from conftest import paper_listing


@dataclass
class Item:
    function: str = "foo"
    current_source: str = "int foo(int x) { return x; }"
    includes: list = field(default_factory=lambda: ["#include <stdio.h>"])
    pinned_child_signatures: list = field(default_factory=lambda: ["int bar(int y)"])
    unit_test: UnitTest | None = None


def test_system_prompts_are_verbatim():
    assert render_system("refactor") == paper_listing("You are a C and High-Level Synthesis (HLS) expert. \nAssist")
    assert render_system("optimize") == paper_listing("You are a C and High-Level Synthesis (HLS) expert. Assist in")


def test_system_prompt_texts_differ_and_mention_pragmas():
    opt = render_system("optimize")
    assert "hls_unroll" in opt and "hls_pipeline_init_interval" in opt
    assert "Do not add pragmas" in render_system("refactor")


def test_initial_templates_are_verbatim():
    assert load_template(PromptRole.RefactorInitial).text == paper_listing("Help me rewrite the <top_function>")
    assert load_template(PromptRole.OptimizeInitial).text == paper_listing("Update the <top_function>")


@pytest.mark.parametrize("key,prefix", [
    ("streaming", "Rewrite the {top_function} function to be compatible for HLS. The first task"),
    ("recursion", "Here are two examples on how simple cases and more complex cases of recursion"),
    ("interface_pointer", None),
    ("floating_point", None),
    ("redefinition", None),
])
def test_icl_assets_are_verbatim(key, prefix):
    text = icl_asset(key).text
    assert paper_listing(prefix or text[:60]) == text


def test_five_icl_assets():
    assert len(ICL_KEYS) == 5
    for k in ICL_KEYS:
        assert icl_asset(k).text.strip()
    with pytest.raises(KeyError):
        icl_asset("nope")


def test_icl_routing():
    assert ICL_FOR_CLASS[ErrorClass.SynthRecursion] == "recursion"
    assert ICL_FOR_CLASS[ErrorClass.SynthPointer] == "interface_pointer"
    assert ICL_FOR_CLASS[ErrorClass.SynthFloat] == "floating_point"
    assert ICL_FOR_CLASS[ErrorClass.SynthRedefinition] == "redefinition"
    assert LINT_ICL[LintCategory.UnboundedLoop] == "streaming"
    # every routed key is a real asset
    for k in set(ICL_FOR_CLASS.values()) | set(LINT_ICL.values()):
        if k is not None:
            icl_asset(k)


def test_render_refactor_fills_every_slot():
    it = Item(unit_test=UnitTest("foo", "int main(void) { return foo(1) != 1; }"))
    req = render_refactor(it, "candidate.c:1:1: error: [Recursion] boom", "recursion")
    assert req[0] == {"role": "system", "content": render_system("refactor")}
    user = req[1]["content"]
    assert "<" + "top_function>" not in user and "<code_to_fix>" not in user
    assert "Help me rewrite the foo function" in user
    assert "int bar(int y)" in user and "#include <stdio.h>" in user
    assert "[Recursion] boom\nHere are two examples" in user
    assert "return foo(1) != 1" in user


def test_render_optimize_target():
    req = render_optimize(Item(), "latency")
    assert "optimize it for HLS targeting latency." in req[1]["content"]
    assert req[0]["content"] == render_system("optimize")


def test_long_tests_are_truncated():
    it = Item(unit_test=UnitTest("foo", "x" * 10000))
    user = render_refactor(it, "", None, test_limit=100)[1]["content"]
    assert TRUNCATION_MARKER in user and "x" * 101 not in user


def test_missing_binding():
    with pytest.raises(MissingBinding):
        render_template(PromptTemplate("t", PromptRole.RefactorInitial, "hello <top_function>"), {})


@pytest.mark.parametrize("text,cls", [
    ("a.c:3: error: redefinition of 'foo'", ErrorClass.SynthRedefinition),
    ("a.c:3: error: expected ';' before 'j'", ErrorClass.CompileError),
])
def test_classify_compiler(text, cls):
    assert classify_error("compiler", text) == cls


def test_classify_synth():
    assert classify_error("synth", "c.c:1:1: error: [FloatingPoint] x") == ErrorClass.SynthFloat
    assert classify_error("synth", "Recursive function call detected") == ErrorClass.SynthRecursion
    assert classify_error("synth", "something else") == ErrorClass.SynthOther
    assert classify_error("test", "") == ErrorClass.TestFailure


@given(st.text(max_size=300))
def test_classify_is_total(text):
    for src in ("compiler", "synth", "test"):
        assert isinstance(classify_error(src, text), ErrorClass)


def test_extract_last_c_block():
    resp = "first\n```c\nint a;\n```\nthen\n```python\nprint(1)\n```\n```cpp\nint b(void) { return 1; }\n```\n"
    assert extract_code(resp) == "int b(void) { return 1; }\n"


def test_extract_adds_missing_includes():
    code = extract_code("```c\nint f(void) { return 0; }\n```", ["#include <stdio.h>"])
    assert code.startswith("#include <stdio.h>\nint f")


def test_extract_skips_echoed_exemplars():
    exemplar = icl_asset("interface_pointer").text
    resp = f"As in the example:\n{exemplar}\nmine:\n```c\nint f(int a[4]) {{ return a[0]; }}\n```\nand again\n{exemplar}"
    assert "int f(int a[4])" in extract_code(resp)


def test_extract_unfenced():
    resp = "Sure, here it is:\nint f(int x) {\n  return x * 2;\n}\nHope that helps."
    assert extract_code(resp).strip() == "int f(int x) {\n  return x * 2;\n}"


def test_extract_nothing():
    with pytest.raises(NoCodeFound):
        extract_code("I cannot help with that.")
    with pytest.raises(NoCodeFound):
        extract_code("```python\nprint(1)\n```")
