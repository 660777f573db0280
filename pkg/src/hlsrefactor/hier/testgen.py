"""Standalone C unit tests that replay captured calls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from hlsrefactor.cfront import FunctionInfo
from hlsrefactor.hier.capture import CapturedCall
from hlsrefactor.hier.typeplan import TypeEnv, Unserializable, function_plan

DEFAULT_MAX_CASES = 8
DEFAULT_FLOAT_TOLERANCE = 1e-6

_INT64_MIN = -(2**63)


@dataclass
class UnitTest:
    function: str
    source_text: str
    expected: list[tuple[int, str, object]] = field(default_factory=list)
    float_tolerance: float = DEFAULT_FLOAT_TOLERANCE
    # golden stdout for tests that are judged on output as well as exit status
    expected_stdout: str | None = None

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "source_text": self.source_text,
            "expected": [list(e) for e in self.expected],
            "float_tolerance": self.float_tolerance,
            "expected_stdout": self.expected_stdout,
        }


def c_literal(text: str, plan: dict) -> str:
    if plan["float"]:
        v = float(text)
        if math.isnan(v):
            return '__builtin_nan("")'
        if math.isinf(v):
            return "__builtin_inf()" if v > 0 else "(-__builtin_inf())"
        return text
    v = int(text)
    if not plan["signed"]:
        return f"{v}ULL"
    if v == _INT64_MIN:
        return "(-9223372036854775807LL - 1)"
    return f"{v}LL"


def initializer(value, plan: dict) -> str:
    k = plan["kind"]
    if k == "scalar":
        return c_literal(value, plan)
    if k == "struct":
        return "{" + ", ".join(initializer(v, fp) for (_, fp), (_, v) in zip(plan["fields"], value["fields"])) + "}"
    dims = value["extent"]
    elems = [initializer(e, plan["elem"]) for e in value["elems"]]
    if not elems:
        return "{0}"
    return _nest(elems, dims)


def _nest(elems: list[str], dims: list[int]) -> str:
    if len(dims) <= 1:
        return "{" + ", ".join(elems) + "}"
    step = len(elems) // dims[0]
    return "{" + ", ".join(_nest(elems[k * step:(k + 1) * step], dims[1:]) for k in range(dims[0])) + "}"


def _check_macro(plan: dict) -> str:
    if plan["float"]:
        return "TC_CHECK_F"
    return "TC_CHECK_I" if plan["signed"] else "TC_CHECK_U"


def _leaf_checks(expr: str, value, plan: dict, case: int, slot: str) -> list[str]:
    k = plan["kind"]
    if k == "scalar":
        return [f'{_check_macro(plan)}({expr}, {c_literal(value, plan)}, {case}, "{slot}", 0);']
    if k == "struct":
        out = []
        for (n, fp), (_, v) in zip(plan["fields"], value["fields"]):
            out += _leaf_checks(f"{expr}.{n}", v, fp, case, f"{slot}.{n}")
        return out
    return _array_checks(expr, value, plan, case, slot)


def _array_checks(expr: str, value, plan: dict, case: int, slot: str) -> list[str]:
    elem = plan["elem"]
    n = len(value["elems"])
    if n == 0:
        return []
    if elem["kind"] == "scalar":
        ct = elem["ctype"]
        want = ", ".join(c_literal(v, elem) for v in value["elems"])
        return [
            "{",
            f"    static const {ct} tc_want[{n}] = {{{want}}};",
            f"    const {ct} *tc_got = (const {ct} *)({expr});",
            f"    for (tc_k = 0; tc_k < {n}; tc_k++)",
            f'        {_check_macro(elem)}(tc_got[tc_k], tc_want[tc_k], {case}, "{slot}", tc_k);',
            "}",
        ]
    # arrays of structs: check leaf by leaf
    out = []
    dims = value["extent"]
    for flat, v in enumerate(value["elems"]):
        idx, rem = [], flat
        for d in reversed(dims):
            idx.append(rem % d)
            rem //= d
        sub = "".join(f"[{i}]" for i in reversed(idx))
        out += _leaf_checks(f"({expr}){sub}", v, elem, case, f"{slot}{sub}")
    return out


PRELUDE = """#include <stdio.h>

#define TC_TOL {tol!r}
#define TC_CHECK_I(got, want, c, slot, k) do {{ if ((long long)(got) != (long long)(want)) {{ \\
    printf("MISMATCH call %d slot %s[%ld]: got %lld want %lld\\n", c, slot, (long)(k), (long long)(got), (long long)(want)); \\
    return 1; }} }} while (0)
#define TC_CHECK_U(got, want, c, slot, k) do {{ if ((unsigned long long)(got) != (unsigned long long)(want)) {{ \\
    printf("MISMATCH call %d slot %s[%ld]: got %llu want %llu\\n", c, slot, (long)(k), (unsigned long long)(got), (unsigned long long)(want)); \\
    return 1; }} }} while (0)
#define TC_CHECK_F(got, want, c, slot, k) do {{ if (!tc_feq((double)(got), (double)(want))) {{ \\
    printf("MISMATCH call %d slot %s[%ld]: got %.17g want %.17g\\n", c, slot, (long)(k), (double)(got), (double)(want)); \\
    return 1; }} }} while (0)

static int tc_feq(double got, double want)
{{
    double d, m, mw;
    if (got != got || want != want)
        return got != got && want != want;
    if (got == want)
        return 1;
    d = got > want ? got - want : want - got;
    m = got < 0 ? -got : got;
    mw = want < 0 ? -want : want;
    if (mw > m)
        m = mw;
    return d <= TC_TOL * m;
}}
"""


def synthesize_unit_test(
    f: FunctionInfo,
    captures: list[CapturedCall],
    max_cases: int = DEFAULT_MAX_CASES,
    plan: dict | None = None,
    env: TypeEnv | None = None,
    float_tolerance: float = DEFAULT_FLOAT_TOLERANCE,
) -> UnitTest:
    """A main() replaying the first ``max_cases`` captured calls of ``f`` in order."""
    if max_cases < 1:
        raise ValueError("max_cases must be at least 1")
    cases = sorted((c for c in captures if c.function == f.name), key=lambda c: c.call_index)
    if not cases:
        raise ValueError(f"no captures for {f.name}")
    if plan is None:
        plan = function_plan(f, env or TypeEnv({}, {}, {}))
    params = plan["params"]
    cases = cases[:max_cases]
    body: list[str] = []
    expected: list[tuple[int, str, object]] = []
    for ci, call in enumerate(cases):
        body.append(f"    {{ /* call {call.call_index} */")
        args = []
        for p, val in zip(params, call.args_in):
            var = f"tc_{p['name']}"
            args.append(var)
            if p.get("mode") == "buffer":
                dims = val["extent"]
                outer = dims[: p.get("outer", 1)]
                if not val["elems"]:
                    decl = f"{p['pointee']} {var}[1]"
                    body.append(f"        {decl};")
                    continue
                decl = f"{p['pointee']} {var}" + "".join(f"[{d}]" for d in outer)
                body.append(f"        {decl} = {initializer(val, p)};")
            else:
                if p["kind"] == "array":
                    raise Unserializable(p["type_text"])
                body.append(f"        {p['type_text']} {var} = {initializer(val, p)};")
        call_expr = f"{f.name}({', '.join(args)})"
        if plan["ret"] is not None:
            body.append(f"        {f.return_type} tc_ret = {call_expr};")
        else:
            body.append(f"        {call_expr};")
        for p, val in zip(params, call.args_out):
            if p.get("mode") != "buffer" or not p.get("writable") or val is None:
                continue
            for ln in _array_checks(f"tc_{p['name']}", val, p, call.call_index, p["name"]):
                body.append("        " + ln)
            expected.append((ci, p["name"], val))
        if plan["ret"] is not None and call.return_value is not None:
            for ln in _leaf_checks("tc_ret", call.return_value, plan["ret"], call.call_index, "return"):
                body.append("        " + ln)
            expected.append((ci, "return", call.return_value))
        body.append("    }")
    src = (
        f"/* replays {len(cases)} captured call(s) of {f.name} */\n"
        + PRELUDE.format(tol=float_tolerance)
        + "\nint main(void)\n{\n    long tc_k = 0;\n    (void)tc_k;\n"
        + "\n".join(body)
        + f'\n    printf("{f.name}: {len(cases)} call(s) replayed\\n");\n    return 0;\n}}\n'
    )
    return UnitTest(f.name, src, expected, float_tolerance)
