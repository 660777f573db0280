"""Live parameter capture from a reference run.

The primary path compiles the unit plus its top-level test with debug info
and drives a batch debugger: one breakpoint per target function reads the
arguments at entry, a finish breakpoint reads the return value and the
pointed-to buffers at exit. The secondary path wraps every target in a
printing shim and parses its stderr; it exists as an independent oracle for
the first and uses the same serializer.
"""

from __future__ import annotations

import json
import logging
import math
import shlex
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path

from hlsrefactor import ctext
from hlsrefactor.cfront import SourceUnit, parse_unit_ast
from hlsrefactor.hier.typeplan import (
    ExtentUnknown,
    TypeEnv,
    Unserializable,
    function_plan,
)
from hlsrefactor.toolchain import Toolchain, run_program

log = logging.getLogger(__name__)

DEFAULT_DEBUGGER_CMD = ["gdb", "-q", "-batch", "-nx"]


class CaptureFailure(Exception):
    def __init__(self, function: str, reason: str):
        super().__init__(f"capture failed for {function}: {reason}")
        self.function = function
        self.reason = reason


@dataclass
class CoverageGap:
    function: str
    reason: str = "never called by the top-level test"


@dataclass
class CapturedCall:
    function: str
    call_index: int
    args_in: list
    args_out: list
    return_value: object = None
    seq: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "CapturedCall":
        return cls(**json.loads(line))


@dataclass
class CaptureSession:
    calls: list[CapturedCall]
    plans: dict[str, dict]
    failures: dict[str, str] = field(default_factory=dict)
    gaps: list[CoverageGap] = field(default_factory=list)
    log: str = ""


# -- serialization shared by both capture paths --------------------------------

def format_scalar(v, plan: dict) -> str:
    if plan["float"]:
        return repr(float(v))
    return str(int(v))


def serialize(raw, plan: dict):
    """Raw debugger/oracle values to the persisted form (scalars as text)."""
    kind = plan["kind"]
    if kind == "scalar":
        return format_scalar(raw, plan)
    if kind == "struct":
        return {"fields": [[n, serialize(v, fp)] for (n, fp), (_, v) in zip(plan["fields"], raw["fields"])]}
    return {
        "extent": list(raw["dims"]),
        "elems": [serialize(e, plan["elem"]) for e in raw["elems"]],
    }


def scalar_value(text: str, plan: dict):
    return float(text) if plan["float"] else int(text)


def write_captures(calls: list[CapturedCall], path: Path) -> None:
    path.write_text("".join(c.to_json() + "\n" for c in calls))


def read_captures(path: Path) -> list[CapturedCall]:
    return [CapturedCall.from_json(ln) for ln in path.read_text().splitlines() if ln.strip()]


def coverage_gaps(calls: list[CapturedCall], targets) -> list[CoverageGap]:
    seen = {c.function for c in calls}
    return [CoverageGap(t) for t in sorted(targets) if t not in seen]


def calls_for(calls: list[CapturedCall], fn: str) -> list[CapturedCall]:
    return sorted((c for c in calls if c.function == fn), key=lambda c: c.call_index)


# -- plans ---------------------------------------------------------------------

def build_plans(unit: SourceUnit, targets) -> tuple[dict[str, dict], dict[str, str]]:
    ast, fns = parse_unit_ast(unit)
    env = TypeEnv.from_ast(ast)
    by_name = {f.name: f for f in fns if f.is_defined_here}
    plans, failures = {}, {}
    for t in sorted(targets):
        if t not in by_name:
            failures[t] = "not defined in the unit"
            continue
        try:
            plans[t] = function_plan(by_name[t], env)
        except ExtentUnknown as exc:
            failures[t] = f"no inferable extent for pointer parameter {exc.param!r}"
        except Unserializable as exc:
            failures[t] = str(exc)
    return plans, failures


def _raw_from_session(records: list[dict], plans: dict[str, dict]) -> list[CapturedCall]:
    out = []
    for r in sorted(records, key=lambda r: r["seq"]):
        plan = plans[r["function"]]
        params = plan["params"]
        args_in = [serialize(v, p) for v, p in zip(r["args_in"], params)]
        args_out = [
            serialize(v, p) if v is not None else None for v, p in zip(r["args_out"], params)
        ]
        ret = None
        if plan["ret"] is not None and r.get("return_value") is not None:
            ret = serialize(r["return_value"], plan["ret"])
        out.append(CapturedCall(r["function"], r["call_index"], args_in, args_out, ret, r["seq"]))
    return out


# -- debugger path -------------------------------------------------------------

GDB_SCRIPT = r'''
import gdb, json

CFG = json.loads(%(cfg)r)
PLANS = CFG["plans"]
state = {"seq": 0, "counts": {}, "hit": None, "exit": None, "error": None}
records = []


def read(v, p):
    k = p["kind"]
    if k == "scalar":
        return float(v) if p["float"] else int(v)
    if k == "struct":
        return {"fields": [[n, read(v[n], fp)] for n, fp in p["fields"]]}
    return read_array(v, p["dims"], p["elem"])


def read_array(v, dims, elem):
    flat = []

    def rec(x, ds):
        if not ds:
            flat.append(read(x, elem))
            return
        for i in range(ds[0]):
            rec(x[i], ds[1:])

    rec(v, dims)
    return {"dims": list(dims), "elems": flat}


class Finish(gdb.FinishBreakpoint):
    def __init__(self, frame, rec, bufs, ret_plan):
        super().__init__(frame, internal=True)
        self.rec, self.bufs, self.ret_plan = rec, bufs, ret_plan

    def stop(self):
        try:
            for idx, (addr, ptype, dims, elem) in self.bufs.items():
                ptr = gdb.Value(addr).cast(ptype)
                self.rec["args_out"][idx] = read_array(ptr, dims, elem)
            if self.ret_plan is not None and self.return_value is not None:
                self.rec["return_value"] = read(self.return_value, self.ret_plan)
            self.rec["done"] = True
        except Exception as exc:
            state["error"] = "%%s: %%s" %% (self.rec["function"], exc)
        return False

    def out_of_scope(self):
        self.rec["done"] = False


class Entry(gdb.Breakpoint):
    def __init__(self, spec, fname):
        super().__init__(spec, internal=False)
        self.fname = fname

    def stop(self):
        state["hit"] = self.fname
        return True


def on_exit(ev):
    state["exit"] = ev.exit_code if hasattr(ev, "exit_code") else -1


gdb.events.exited.connect(on_exit)
gdb.execute("set pagination off")
gdb.execute("set confirm off")
for name in PLANS:
    Entry(CFG["file"] + ":" + name, name)


def capture_entry(fname):
    frame = gdb.newest_frame()
    plan = PLANS[fname]
    state["seq"] += 1
    k = state["counts"].get(fname, 0)
    state["counts"][fname] = k + 1
    rec = {"function": fname, "call_index": k, "seq": state["seq"],
           "args_in": [], "args_out": [None] * len(plan["params"]),
           "return_value": None, "done": False}
    scalars = {}
    vals = [frame.read_var(p["name"]) for p in plan["params"]]
    for p, v in zip(plan["params"], vals):
        if p.get("mode") == "value" and p["kind"] == "scalar" and not p["float"]:
            scalars[p["name"]] = int(v)
    bufs = {}
    for idx, (p, v) in enumerate(zip(plan["params"], vals)):
        if p.get("mode") == "buffer":
            dims = list(p["dims"])
            if dims[0] is None:
                dims[0] = max(0, scalars[p["extent_param"]])
            rec["args_in"].append(read_array(v, dims, p["elem"]))
            bufs[idx] = (int(v), v.type, dims, p["elem"])
        else:
            rec["args_in"].append(read(v, p))
    records.append(rec)
    Finish(frame, rec, bufs, plan["ret"])


try:
    gdb.execute("run", to_string=True)
    while state["exit"] is None and state["error"] is None:
        fname = state["hit"]
        state["hit"] = None
        if fname is None:
            state["error"] = "inferior stopped outside a target breakpoint"
            break
        capture_entry(fname)
        gdb.execute("continue", to_string=True)
except Exception as exc:
    state["error"] = str(exc)

with open(CFG["out"], "w") as fh:
    json.dump({"exit": state["exit"], "error": state["error"], "records": records}, fh)
try:
    gdb.execute("kill", to_string=True)
except Exception:
    pass
'''


def _compose_capture_tu(unit: SourceUnit, top_test: str) -> str:
    return unit.raw_text.rstrip("\n") + '\n#line 1 "test.c"\n' + top_test


def capture_session(
    unit: SourceUnit,
    top_test: str,
    targets,
    workdir: Path,
    debugger_cmd=None,
    toolchain: Toolchain | None = None,
    timeout: float = 300.0,
) -> CaptureSession:
    """Debugger capture for every target with a replayable plan."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    toolchain = toolchain or Toolchain()
    plans, failures = build_plans(unit, targets)
    src = workdir / "capture_tu.c"
    src.write_text(_compose_capture_tu(unit, top_test))
    exe = workdir / "capture_tu"
    res = toolchain.compile(src, exe, extra_flags=["-g", "-O0", f"-I{Path(unit.path).resolve().parent}"])
    if not res.ok:
        raise CaptureFailure("<unit>", "reference build failed:\n" + res.log)
    out_json = workdir / "capture_raw.json"
    script = workdir / "capture_gdb.py"
    cfg = {"plans": plans, "out": str(out_json), "file": src.name}
    script.write_text(GDB_SCRIPT % {"cfg": json.dumps(cfg)})
    cmd = debugger_cmd or DEFAULT_DEBUGGER_CMD
    if isinstance(cmd, str):
        cmd = shlex.split(cmd)
    full = [*cmd, "-x", str(script), "--args", str(exe)]
    try:
        proc = subprocess.run(full, capture_output=True, text=True, timeout=timeout, cwd=workdir)
    except FileNotFoundError as exc:
        raise CaptureFailure("<debugger>", f"debugger not found: {exc}") from exc
    except subprocess.TimeoutExpired as exc:
        raise CaptureFailure("<debugger>", "debugger session timed out") from exc
    glog = proc.stdout + proc.stderr
    if not out_json.exists():
        raise CaptureFailure("<debugger>", "breakpoint script did not finish:\n" + glog[-2000:])
    data = json.loads(out_json.read_text())
    if data["error"]:
        raise CaptureFailure("<debugger>", data["error"])
    if data["exit"] != 0:
        raise CaptureFailure("<test>", f"top-level test exited with {data['exit']} under the debugger")
    incomplete = [r for r in data["records"] if not r["done"]]
    for r in incomplete:
        failures.setdefault(r["function"], "call did not return normally")
    records = [r for r in data["records"] if r["done"] and r["function"] not in failures]
    calls = _raw_from_session(records, plans)
    gaps = coverage_gaps(calls, set(plans) - set(failures))
    return CaptureSession(calls, plans, failures, gaps, glog)


def capture_calls(
    unit: SourceUnit,
    top_test: str,
    targets,
    debugger_cmd=None,
    workdir: Path | None = None,
    toolchain: Toolchain | None = None,
) -> list[CapturedCall]:
    """Every dynamic call to a target, ordered by entry.

    Raises CaptureFailure if any target cannot be captured. Targets never
    called produce no entries (see :func:`coverage_gaps`).
    """
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        sess = capture_session(unit, top_test, targets, Path(workdir or tmp), debugger_cmd, toolchain)
    if sess.failures:
        fn, reason = sorted(sess.failures.items())[0]
        raise CaptureFailure(fn, reason)
    return sess.calls


# -- instrumentation oracle ----------------------------------------------------

def _print_stmts(expr: str, plan: dict, dims_expr: list[str] | None, depth: int = 0) -> list[str]:
    k = plan["kind"]
    if k == "scalar":
        if plan["float"]:
            return [f'fprintf(stderr, " %.17g", (double)({expr}));']
        if plan["signed"]:
            return [f'fprintf(stderr, " %lld", (long long)({expr}));']
        return [f'fprintf(stderr, " %llu", (unsigned long long)({expr}));']
    if k == "struct":
        out = []
        for n, fp in plan["fields"]:
            out += _print_stmts(f"({expr}).{n}", fp, None, depth)
        return out
    dims = dims_expr if dims_expr is not None else [str(d) for d in plan["dims"]]
    idx = [f"tc_i{depth}_{j}" for j in range(len(dims))]
    inner = _print_stmts(expr + "".join(f"[{i}]" for i in idx), plan["elem"], None, depth + 1)
    lines = ["{ long long " + ", ".join(idx) + ";"]
    for i, d in zip(idx, dims):
        lines.append(f"for ({i} = 0; {i} < (long long)({d}); {i}++)")
    lines.append("{ " + " ".join(inner) + " }")
    lines.append("}")
    return [" ".join(lines)]


def _wrapper(name: str, header: str, plan: dict) -> str:
    params = plan["params"]
    args = ", ".join(p["name"] for p in params)
    lines = [header.replace(name, name, 1) + " {", "    long long tc_seq = ++tc_cap_seq;"]
    lines.append(f'    fprintf(stderr, "@@CAP ENTER {name} %lld\\n", tc_seq);')

    def dump(tag: str, writable_only: bool):
        for k, p in enumerate(params):
            if tag == "O" and p.get("mode") != "buffer":
                continue
            lines.append(f'    fprintf(stderr, "@@{tag} %lld {k}", tc_seq);')
            if p.get("mode") == "buffer":
                dims = [p["extent_param"] if d is None else str(d) for d in p["dims"]]
                lines.extend("    " + s for s in _print_stmts(p["name"], p, dims))
            else:
                lines.extend("    " + s for s in _print_stmts(p["name"], p, None))
            lines.append('    fprintf(stderr, "\\n");')

    dump("P", False)
    ret = plan["ret"]
    call = f"{name}__tc_orig({args})"
    if ret is None:
        lines.append(f"    {call};")
    else:
        lines.append(f"    __typeof__({call}) tc_ret = {call};")
    lines.append(f'    fprintf(stderr, "@@CAP EXIT {name} %lld\\n", tc_seq);')
    dump("O", True)
    if ret is not None:
        lines.append('    fprintf(stderr, "@@R %lld", tc_seq);')
        lines.extend("    " + s for s in _print_stmts("tc_ret", ret, None))
        lines.append('    fprintf(stderr, "\\n");')
        lines.append("    return tc_ret;")
    lines.append("}")
    return "\n".join(lines)


def instrument(raw_text: str, plans: dict[str, dict]) -> str:
    """Rename each planned definition and add a printing wrapper under the old name."""
    chunks = [c for c in ctext.split_chunks(raw_text) if c.kind == "function" and c.name in plans]
    out = []
    pos = 0
    for c in sorted(chunks, key=lambda c: c.start):
        out.append(raw_text[pos : c.start])
        rel = c.name_pos - c.start
        renamed = c.text[:rel] + c.name + "__tc_orig" + c.text[rel + len(c.name):]
        out.append(ctext.prototype_of(c) + "\n")
        out.append(renamed + "\n")
        out.append(_wrapper(c.name, c.header, plans[c.name]))
        pos = c.end
    out.append(raw_text[pos:])
    head = "#include <stdio.h>\nstatic long long tc_cap_seq;\n"
    return head + "".join(out)


def _consume(tokens: list[str], plan: dict, dims=None):
    k = plan["kind"]
    if k == "scalar":
        return scalar_value(tokens.pop(0), plan)
    if k == "struct":
        return {"fields": [[n, _consume(tokens, fp)] for n, fp in plan["fields"]]}
    dims = list(dims if dims is not None else plan["dims"])
    count = math.prod(dims) if dims else 1
    return {"dims": dims, "elems": [_consume(tokens, plan["elem"]) for _ in range(count)]}


def parse_instrumented(stderr: str, plans: dict[str, dict]) -> list[CapturedCall]:
    recs: dict[int, dict] = {}
    counts: dict[str, int] = {}
    lines: dict[tuple[str, int], list[tuple[int, list[str]]]] = {}
    for ln in stderr.splitlines():
        if not ln.startswith("@@"):
            continue
        parts = ln.split()
        tag = parts[0]
        if tag == "@@CAP" and parts[1] == "ENTER":
            fn, seq = parts[2], int(parts[3])
            k = counts.get(fn, 0)
            counts[fn] = k + 1
            n = len(plans[fn]["params"])
            recs[seq] = {"function": fn, "call_index": k, "seq": seq, "args_in": [None] * n,
                         "args_out": [None] * n, "return_value": None}
        elif tag in ("@@P", "@@O"):
            seq, idx = int(parts[1]), int(parts[2])
            lines.setdefault((tag, seq), []).append((idx, parts[3:]))
        elif tag == "@@R":
            lines.setdefault(("@@R", int(parts[1])), []).append((-1, parts[2:]))
    for seq, rec in recs.items():
        plan = plans[rec["function"]]
        params = plan["params"]
        p_lines = dict(lines.get(("@@P", seq), []))
        scalars = {}
        for idx, p in enumerate(params):
            if p.get("mode") != "buffer":
                rec["args_in"][idx] = _consume(list(p_lines[idx]), p)
                if p["kind"] == "scalar" and not p["float"]:
                    scalars[p["name"]] = rec["args_in"][idx]
        for idx, p in enumerate(params):
            if p.get("mode") == "buffer":
                dims = [max(0, scalars[p["extent_param"]]) if d is None else d for d in p["dims"]]
                rec["args_in"][idx] = _consume(list(p_lines[idx]), p, dims)
                o_lines = dict(lines.get(("@@O", seq), []))
                if idx in o_lines:
                    rec["args_out"][idx] = _consume(list(o_lines[idx]), p, dims)
        r_lines = lines.get(("@@R", seq))
        if plan["ret"] is not None and r_lines:
            rec["return_value"] = _consume(list(r_lines[0][1]), plan["ret"])
    return _raw_from_session(list(recs.values()), plans)


def capture_instrumented(
    unit: SourceUnit,
    top_test: str,
    targets,
    workdir: Path,
    toolchain: Toolchain | None = None,
    timeout: float = 60.0,
) -> list[CapturedCall]:
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    toolchain = toolchain or Toolchain()
    plans, failures = build_plans(unit, targets)
    if failures:
        fn, reason = sorted(failures.items())[0]
        raise CaptureFailure(fn, reason)
    src = workdir / "instrumented_tu.c"
    src.write_text(instrument(unit.raw_text, plans).rstrip("\n") + '\n#line 1 "test.c"\n' + top_test)
    exe = workdir / "instrumented_tu"
    res = toolchain.compile(src, exe, extra_flags=[f"-I{Path(unit.path).resolve().parent}"])
    if not res.ok:
        raise CaptureFailure("<instrumented>", res.log)
    run = run_program(exe, timeout, cwd=workdir)
    if not run.ok:
        raise CaptureFailure("<test>", run.log)
    return parse_instrumented(run.stderr, plans)
