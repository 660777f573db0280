"""Value-shape plans for function parameters.

A plan says how to read a parameter at a breakpoint, how to print it from
instrumented C, how to serialize it, and how to rebuild it in a standalone
test. Plans are plain dicts so they can be shipped into the debugger's
Python interpreter as JSON.

Plan shapes::

    {"kind": "scalar", "ctype": "unsigned char", "float": false, "signed": false}
    {"kind": "array", "dims": [4, 4], "elem": <scalar or struct plan>}
    {"kind": "struct", "ctype": "struct pt", "fields": [["x", <plan>], ...]}

A parameter plan adds ``mode`` ("value" or "buffer"). Buffers are pointer or
array parameters; their ``dims`` may start with ``null`` when the leading
extent comes from a sibling count parameter named by ``extent_param``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from pycparser import c_ast

from hlsrefactor.cfront import FunctionInfo, type_text

COUNT_PARAM_NAMES = ("n", "len", "size", "count")

_FLOAT_NAMES = {"float", "double"}
_INT_NAMES = {
    "char", "short", "int", "long", "signed", "unsigned", "_Bool", "bool",
}


class Unserializable(Exception):
    def __init__(self, ctype: str, reason: str = ""):
        super().__init__(f"cannot reconstruct values of type {ctype!r}" + (f": {reason}" if reason else ""))
        self.ctype = ctype
        self.reason = reason


class ExtentUnknown(Exception):
    def __init__(self, function: str, param: str):
        super().__init__(f"{function}: no inferable extent for pointer parameter {param!r}")
        self.function = function
        self.param = param


@dataclass
class TypeEnv:
    typedefs: dict[str, c_ast.Node]
    structs: dict[str, c_ast.Node]
    enums: dict[str, int]

    @classmethod
    def from_ast(cls, ast: c_ast.FileAST) -> "TypeEnv":
        env = cls({}, {}, {})
        for ext in ast.ext:
            if isinstance(ext, c_ast.Typedef):
                env.typedefs[ext.name] = ext.type
            env._collect(ext)
        return env

    def _collect(self, node: c_ast.Node) -> None:
        if isinstance(node, (c_ast.Struct, c_ast.Union)) and node.name and node.decls is not None:
            self.structs[("union " if isinstance(node, c_ast.Union) else "struct ") + node.name] = node
        if isinstance(node, c_ast.Enum) and node.values is not None:
            val = -1
            for e in node.values.enumerators:
                v = const_eval(e.value, self) if e.value is not None else None
                val = v if v is not None else val + 1
                self.enums[e.name] = val
        for _, child in node.children():
            self._collect(child)


def _int_literal(text: str) -> int | None:
    t = text.rstrip("uUlL")
    try:
        if t.lower().startswith("0x"):
            return int(t, 16)
        if t.lower().startswith("0b"):
            return int(t, 2)
        if len(t) > 1 and t.startswith("0") and t.isdigit():
            return int(t, 8)
        return int(t)
    except ValueError:
        return None


def const_eval(node: c_ast.Node | None, env: TypeEnv | None = None) -> int | None:
    """Integer value of a constant expression, or None if it is not one."""
    if node is None:
        return None
    if isinstance(node, c_ast.Constant):
        if node.type in ("int", "unsigned int", "long int", "unsigned long int",
                         "long long int", "unsigned long long int") or re.fullmatch(r"[0-9xXa-fA-FbBuUlL]+", node.value):
            return _int_literal(node.value)
        if node.type == "char":
            s = node.value[1:-1]
            return ord(s) if len(s) == 1 else None
        return None
    if isinstance(node, c_ast.ID):
        return env.enums.get(node.name) if env else None
    if isinstance(node, c_ast.UnaryOp):
        if node.op == "sizeof":
            return None
        v = const_eval(node.expr, env)
        if v is None:
            return None
        return {"-": -v, "+": v, "~": ~v, "!": int(not v)}.get(node.op)
    if isinstance(node, c_ast.BinaryOp):
        a, b = const_eval(node.left, env), const_eval(node.right, env)
        if a is None or b is None:
            return None
        ops = {
            "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
            "/": lambda: int(a / b) if b else None, "%": lambda: a % b if b else None,
            "<<": lambda: a << b, ">>": lambda: a >> b, "&": lambda: a & b,
            "|": lambda: a | b, "^": lambda: a ^ b,
        }
        f = ops.get(node.op)
        return f() if f else None
    if isinstance(node, c_ast.Cast):
        return const_eval(node.expr, env)
    if isinstance(node, c_ast.TernaryOp):
        c = const_eval(node.cond, env)
        if c is None:
            return None
        return const_eval(node.iftrue if c else node.iffalse, env)
    return None


def _resolve(node: c_ast.Node, env: TypeEnv) -> c_ast.Node:
    """Strip typedefs from a type node (TypeDecl/IdentifierType chains)."""
    seen = 0
    while True:
        seen += 1
        if seen > 50:
            raise Unserializable(type_text(node), "typedef cycle")
        if isinstance(node, c_ast.TypeDecl) and isinstance(node.type, c_ast.IdentifierType):
            names = node.type.names
            if len(names) == 1 and names[0] in env.typedefs:
                node = env.typedefs[names[0]]
                continue
        return node


def scalar_plan(names: list[str]) -> dict:
    base = [n for n in names if n not in ("const", "volatile")]
    if any(n in _FLOAT_NAMES for n in base):
        return {"kind": "scalar", "ctype": " ".join(base), "float": True, "signed": True}
    if not base or not all(n in _INT_NAMES for n in base):
        raise Unserializable(" ".join(names))
    signed = "unsigned" not in base and not ({"_Bool", "bool"} & set(base))
    return {"kind": "scalar", "ctype": " ".join(base), "float": False, "signed": signed}


def value_plan(node: c_ast.Node, env: TypeEnv) -> dict:
    """Plan for an object of the given type (no pointers allowed)."""
    node = _resolve(node, env)
    if isinstance(node, c_ast.TypeDecl):
        inner = node.type
        if isinstance(inner, c_ast.IdentifierType):
            return scalar_plan(inner.names)
        if isinstance(inner, c_ast.Enum):
            return {"kind": "scalar", "ctype": "int", "float": False, "signed": True}
        if isinstance(inner, c_ast.Struct):
            return _struct_plan(inner, env)
        raise Unserializable(type_text(node))
    if isinstance(node, c_ast.ArrayDecl):
        dims = []
        cur = node
        while isinstance(cur, c_ast.ArrayDecl):
            d = const_eval(cur.dim, env)
            if d is None or d <= 0:
                raise Unserializable(type_text(node), "array extent is not a constant")
            dims.append(d)
            cur = _resolve(cur.type, env)
        elem = value_plan(cur, env)
        if elem["kind"] == "array":
            dims += elem["dims"]
            elem = elem["elem"]
        return {"kind": "array", "dims": dims, "elem": elem}
    raise Unserializable(type_text(node), "pointers, unions and function types are not replayable")


def _struct_plan(node: c_ast.Struct, env: TypeEnv) -> dict:
    key = f"struct {node.name}" if node.name else None
    decls = node.decls
    if decls is None and key in env.structs:
        decls = env.structs[key].decls
    if decls is None:
        raise Unserializable(key or "struct", "incomplete struct type")
    fields = []
    for d in decls:
        if d.bitsize is not None:
            raise Unserializable(key or "struct", "bit-fields are not replayable")
        fields.append([d.name, value_plan(d.type, env)])
    return {"kind": "struct", "ctype": key or "", "fields": fields}


def _uses(body: c_ast.Node, name: str) -> list[tuple[c_ast.Node, c_ast.Node | None]]:
    """(ID node, parent) pairs for every use of ``name`` in ``body``."""
    found = []

    def walk(node, parent):
        if isinstance(node, c_ast.ID) and node.name == name:
            found.append((node, parent))
        for _, child in node.children():
            walk(child, node)

    walk(body, None)
    return found


def deref_only(body: c_ast.Node | None, name: str) -> bool:
    """True when pointer ``name`` is only ever used as ``*name`` or ``name->f``."""
    if body is None:
        return False
    uses = _uses(body, name)
    if not uses:
        return False
    for node, parent in uses:
        if isinstance(parent, c_ast.UnaryOp) and parent.op == "*" and parent.expr is node:
            continue
        if isinstance(parent, c_ast.StructRef) and parent.type == "->" and parent.name is node:
            continue
        return False
    return True


def param_plans(f: FunctionInfo, env: TypeEnv) -> list[dict]:
    """Plans for every parameter of ``f``; raises on unreplayable shapes."""
    fdef = f.node
    if isinstance(fdef, c_ast.FuncDef):
        fdecl, body = fdef.decl.type, fdef.body
    else:
        fdecl, body = f.node.type, None
    params = [] if fdecl.args is None else list(fdecl.args.params)
    if len(params) == 1 and type_text(params[0].type) == "void" and params[0].name is None:
        params = []
    names = [getattr(p, "name", None) for p in params]
    plans = []
    for p in params:
        if isinstance(p, c_ast.EllipsisParam):
            raise Unserializable("...", "variadic functions are not replayable")
        node = _resolve(p.type, env)
        ptext = type_text(p.type)
        if isinstance(node, c_ast.ArrayDecl):
            outer = 0
            cur = node
            while isinstance(cur, c_ast.ArrayDecl):
                outer += 1
                cur = cur.type
            if node.dim is None:
                rest = value_plan(node.type, env)
                inner_dims = rest["dims"] if rest["kind"] == "array" else []
                elem = rest["elem"] if rest["kind"] == "array" else rest
                extent_param = _sibling_count(names, p.name)
                if extent_param is None:
                    raise ExtentUnknown(f.name, p.name)
                dims = [None] + inner_dims
            else:
                inner = value_plan(node, env)
                dims, elem, extent_param = inner["dims"], inner["elem"], None
            plans.append(
                _buffer(p.name, ptext, _pointee_text(node), dims, elem, extent_param, _writable(node), outer)
            )
            continue
        if isinstance(node, c_ast.PtrDecl):
            target = _resolve(node.type, env)
            if isinstance(target, c_ast.PtrDecl):
                raise Unserializable(ptext, "pointer to pointer")
            if isinstance(target, c_ast.TypeDecl) and isinstance(target.type, c_ast.IdentifierType) and target.type.names == ["void"]:
                raise Unserializable(ptext, "void pointer")
            elem = value_plan(target, env)
            inner_dims: list[int] = []
            if elem["kind"] == "array":
                inner_dims = elem["dims"]
                elem = elem["elem"]
            extent_param = _sibling_count(names, p.name)
            if extent_param is not None and not deref_only(body, p.name):
                dims = [None] + inner_dims
            elif deref_only(body, p.name):
                dims = [1] + inner_dims
                extent_param = None
            else:
                raise ExtentUnknown(f.name, p.name)
            plans.append(
                _buffer(p.name, ptext, type_text(node.type), dims, elem, extent_param, _writable(node), 1)
            )
            continue
        plan = value_plan(node, env)
        plan = dict(plan, mode="value", name=p.name, type_text=ptext)
        plans.append(plan)
    return plans


def return_plan(f: FunctionInfo, env: TypeEnv) -> dict | None:
    fdef = f.node
    fdecl = fdef.decl.type if isinstance(fdef, c_ast.FuncDef) else fdef.type
    rt = fdecl.type
    if type_text(rt) == "void":
        return None
    node = _resolve(rt, env)
    if isinstance(node, c_ast.PtrDecl):
        raise Unserializable(type_text(rt), "pointer return values are not replayable")
    return value_plan(node, env)


def _pointee_text(arr: c_ast.ArrayDecl) -> str:
    cur = arr
    while isinstance(cur, c_ast.ArrayDecl):
        cur = cur.type
    return type_text(cur)


def _writable(node: c_ast.Node) -> bool:
    cur = node
    while isinstance(cur, (c_ast.ArrayDecl, c_ast.PtrDecl)):
        cur = cur.type
    quals = getattr(cur, "quals", []) or []
    return "const" not in quals


def _sibling_count(names: list[str | None], me: str | None) -> str | None:
    for cand in COUNT_PARAM_NAMES:
        if cand in names and cand != me:
            return cand
    for n in names:
        if n and n != me and any(n.lower().endswith(c) for c in ("_n", "_len", "_size", "_count", "len", "count")):
            return n
    return None


def _buffer(name, ptext, pointee, dims, elem, extent_param, writable, outer) -> dict:
    return {
        "outer": outer,
        "kind": "array",
        "mode": "buffer",
        "name": name,
        "type_text": ptext,
        "pointee": pointee,
        "dims": dims,
        "elem": elem,
        "extent_param": extent_param,
        "writable": writable,
    }


def function_plan(f: FunctionInfo, env: TypeEnv) -> dict:
    return {"params": param_plans(f, env), "ret": return_plan(f, env)}


def concrete_dims(pplan: dict, scalar_args: dict[str, int]) -> list[int]:
    dims = list(pplan["dims"])
    if dims and dims[0] is None:
        n = scalar_args.get(pplan["extent_param"])
        if n is None or n < 0:
            raise ExtentUnknown("?", pplan["name"])
        dims[0] = int(n)
    return dims


def leaf_count(plan: dict) -> int:
    if plan["kind"] == "scalar":
        return 1
    if plan["kind"] == "struct":
        return sum(leaf_count(p) for _, p in plan["fields"])
    n = 1
    for d in plan["dims"]:
        n *= d
    return n * leaf_count(plan["elem"])
