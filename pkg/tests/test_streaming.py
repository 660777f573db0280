from pathlib import Path

import pytest

from hlsrefactor.synth.lint import top_comment
from hlsrefactor.synth.streaming import detect_streaming_interface

from conftest import FIX, paper_listing

FILES = sorted((FIX / "streaming").glob("*.c"))


def label(text: str) -> bool:
    for ln in text.splitlines():
        if ln.startswith("// expect:"):
            return ln.split(":", 1)[1].strip() == "streaming"
    raise AssertionError("fixture without a label")


def test_six_labelled_fixtures():
    assert len(FILES) == 6
    assert sum(label(p.read_text()) for p in FILES) == 3


@pytest.mark.parametrize("path", FILES, ids=lambda p: p.stem)
def test_matches_hand_label(path):
    text = path.read_text()
    v = detect_streaming_interface(top_comment(text), text, path.name)
    assert v.is_streaming == label(text), v.reasons
    assert bool(v.reasons) != v.is_streaming


@pytest.mark.parametrize("stem,prefix", [
    ("blockfrequency_batch", "void BlockFrequency(int M, int n) {"),
    ("blockfrequency_streaming", "void BlockFrequency(int M, int n, bool bit) {"),
    ("cusums_gpt", "void CumulativeSums(int *res_sup, int *res_inf, int epsilon_elem)"),
])
def test_listings_are_verbatim(stem, prefix):
    assert paper_listing(prefix) in (FIX / "streaming" / f"{stem}.c").read_text()


def test_reasons_name_the_offending_loop():
    text = (FIX / "streaming" / "fir_batch.c").read_text()
    v = detect_streaming_interface("fir", text)
    assert any("full input sequence 'x'" in r for r in v.reasons)


def test_no_parameters_is_not_streaming():
    v = detect_streaming_interface("f", "static int s;\nvoid f(void) { s++; }\n")
    assert not v.is_streaming


def test_scalar_only_in_loop_bound_does_not_count():
    src = "static int acc;\nvoid f(int *y, int n) {\n int i;\n for (i = 0; i < n; i++) acc++;\n *y = acc;\n}\n"
    v = detect_streaming_interface("f", src)
    assert not v.is_streaming
