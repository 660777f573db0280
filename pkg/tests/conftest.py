import re
from pathlib import Path

import pytest

from hlsrefactor.harness.config import from_dict, load_yaml

ROOT = Path(__file__).resolve().parent.parent
FIX = Path(__file__).resolve().parent / "fixtures"
PAPER = ROOT / "paper.md"

E2E = {
    "recursion": FIX / "e2e" / "recursion" / "run.yaml",
    "pointer": FIX / "e2e" / "pointer" / "run.yaml",
    "streaming": FIX / "e2e" / "streaming" / "run.yaml",
}
PRAGMA = {k: FIX / "e2e" / "pragma" / f"run_{k}.yaml" for k in ("latency", "misspelled", "area")}


def load_cfg(path: Path, out_dir: Path, **over):
    d = load_yaml(path)
    d.update(over)
    cfg = from_dict(d, path.parent)
    cfg.out_dir = out_dir
    return cfg


def paper_listing(prefix: str) -> str:
    """The reference lstlisting block whose text starts with ``prefix``."""
    text = PAPER.read_text()
    for m in re.finditer(r"\\begin\{lstlisting\}[^\n]*\n(.*?)\\end\{lstlisting\}", text, re.S):
        body = m.group(1).strip("\n").rstrip()
        if body.lstrip().startswith(prefix):
            return body
    raise LookupError(prefix)


@pytest.fixture
def fix():
    return FIX


def compile_and_run(text: str, workdir: Path, name: str = "prog"):
    """gcc + run as an independent check of generated C; returns (ok, stdout, log)."""
    import subprocess

    src = workdir / f"{name}.c"
    src.write_text(text)
    exe = workdir / name
    cc = subprocess.run(["gcc", "-std=gnu11", "-w", str(src), "-o", str(exe), "-lm"], capture_output=True, text=True)
    if cc.returncode != 0:
        return False, "", cc.stderr
    run = subprocess.run([str(exe)], capture_output=True, text=True, timeout=30)
    return run.returncode == 0, run.stdout, run.stderr


def capture_both(workdir: Path):
    """Debugger and instrumentation captures of the 3-level fixture, plus the unit tests built from them."""
    from hlsrefactor.cfront import build_call_graph, load_unit
    from hlsrefactor.hier.capture import calls_for, capture_instrumented, capture_session
    from hlsrefactor.hier.order import work_units
    from hlsrefactor.hier.testgen import synthesize_unit_test

    src = FIX / "c" / "hier3.c"
    test = (FIX / "c" / "hier3_test.c").read_text()
    unit, funcs = load_unit(src, [str(src.parent)])
    g = build_call_graph(funcs, "pipeline")
    reps = [u.name for u in work_units(g) if "pipeline" not in u.members]
    sess = capture_session(unit, test, reps, workdir / "gdb")
    inst = capture_instrumented(unit, test, reps, workdir / "inst")
    tests = {r: synthesize_unit_test(g.functions[r], calls_for(sess.calls, r), 8, plan=sess.plans[r])
             for r in reps if r not in sess.failures and calls_for(sess.calls, r)}
    return unit, reps, sess, inst, tests


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
