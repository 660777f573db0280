"""Does a function consume its input one element per call?"""

from __future__ import annotations

from dataclasses import dataclass, field

from pycparser import c_ast

from hlsrefactor.cfront import FunctionInfo
from hlsrefactor.hier.typeplan import TypeEnv, _resolve
from hlsrefactor.synth.lint import _params, _walk, find_funcdef, parse_source


@dataclass
class StreamingVerdict:
    is_streaming: bool
    reasons: list[str] = field(default_factory=list)


def _ids(node) -> set[str]:
    return {n.name for n in _walk(node) if isinstance(n, c_ast.ID)}


def _root(node) -> c_ast.Node | None:
    """The variable an lvalue ultimately names (``a[i].x`` -> ``a``)."""
    while True:
        if isinstance(node, c_ast.ArrayRef):
            node = node.name
        elif isinstance(node, c_ast.StructRef):
            node = node.name
        elif isinstance(node, c_ast.UnaryOp) and node.op == "*":
            node = node.expr
        elif isinstance(node, c_ast.Cast):
            node = node.expr
        else:
            return node


def _is_deref(node) -> bool:
    while isinstance(node, (c_ast.ArrayRef, c_ast.StructRef, c_ast.Cast)):
        if isinstance(node, c_ast.StructRef) and node.type == "->":
            return True
        if isinstance(node, c_ast.ArrayRef):
            return True
        node = node.name if not isinstance(node, c_ast.Cast) else node.expr
    return isinstance(node, c_ast.UnaryOp) and node.op == "*"


def _is_const(tnode) -> bool:
    cur = tnode
    while isinstance(cur, (c_ast.ArrayDecl, c_ast.PtrDecl)):
        cur = cur.type
    return "const" in (getattr(cur, "quals", None) or [])


def detect_streaming_interface(f: FunctionInfo | str, source: str, filename: str = "candidate.c") -> StreamingVerdict:
    name = f if isinstance(f, str) else f.name
    ast = parse_source(source, filename)
    fdef = find_funcdef(ast, name)
    if fdef is None:
        return StreamingVerdict(False, [f"function '{name}' is not defined"])
    env = TypeEnv.from_ast(ast)

    globals_: dict[str, c_ast.Decl] = {}
    file_statics: set[str] = set()
    for ext in ast.ext:
        if isinstance(ext, c_ast.Decl) and ext.name and not isinstance(ext.type, c_ast.FuncDecl):
            globals_[ext.name] = ext
            if "static" in ext.storage:
                file_statics.add(ext.name)

    params = _params(fdef.decl.type)
    if not params:
        return StreamingVerdict(False, ["no parameters: the function cannot receive a stream element"])
    scalar_params, buffer_params = set(), set()
    for p in params:
        t = _resolve(p.type, env)
        if isinstance(t, (c_ast.PtrDecl, c_ast.ArrayDecl)):
            buffer_params.add(p.name)
        else:
            scalar_params.add(p.name)

    locals_: dict[str, c_ast.Decl] = {}
    static_locals: set[str] = set()
    for node in _walk(fdef.body):
        if isinstance(node, c_ast.Decl) and node.name and not isinstance(node.type, c_ast.FuncDecl):
            locals_[node.name] = node
            if "static" in node.storage:
                static_locals.add(node.name)

    def is_global(n: str) -> bool:
        return n in globals_ and n not in locals_ and n not in scalar_params | buffer_params

    loops = [n for n in _walk(fdef.body) if isinstance(n, (c_ast.For, c_ast.While, c_ast.DoWhile))]
    loop_cond_ids: set[str] = set()
    for lp in loops:
        loop_cond_ids |= _ids(lp.cond)

    # assignments, with taint through plain locals
    assigns = []
    for node in _walk(fdef.body):
        if isinstance(node, c_ast.Assignment):
            assigns.append((node.lvalue, node.rvalue))
        elif isinstance(node, c_ast.Decl) and node.init is not None and node.name:
            assigns.append((c_ast.ID(node.name), node.init))

    reasons: list[str] = []

    # 1. a per-element input parameter reaching persistent state or an output
    def persistent(lv) -> bool:
        root = _root(lv)
        if not isinstance(root, c_ast.ID):
            return False
        n = root.name
        if n in static_locals or is_global(n):
            return True
        return n in buffer_params and _is_deref(lv) or (n in buffer_params and isinstance(lv, c_ast.UnaryOp))

    element_params = []
    for p in sorted(scalar_params):
        if p in loop_cond_ids:
            continue
        tainted = {p}
        changed = True
        while changed:
            changed = False
            for lv, rv in assigns:
                root = _root(lv)
                if isinstance(root, c_ast.ID) and root.name in locals_ and root.name not in static_locals \
                        and root.name not in tainted and _ids(rv) & tainted:
                    tainted.add(root.name)
                    changed = True
        if any(persistent(lv) and _ids(rv) & tainted for lv, rv in assigns):
            element_params.append(p)
    if not element_params:
        reasons.append("no scalar parameter feeds persistent state or an output (no per-element input)")

    # 2. persistent state kept in static storage
    written_statics = {
        _root(lv).name for lv, _ in assigns
        if isinstance(_root(lv), c_ast.ID) and _root(lv).name in file_statics and is_global(_root(lv).name)
    }
    for node in _walk(fdef.body):
        if isinstance(node, c_ast.UnaryOp) and node.op in ("++", "--", "p++", "p--"):
            r = _root(node.expr)
            if isinstance(r, c_ast.ID) and r.name in file_statics and is_global(r.name):
                written_statics.add(r.name)
    if not static_locals and not written_statics:
        reasons.append("no static state preserved across calls")

    # 3. no loop walking the whole input sequence
    for lp in loops:
        lvars = set()
        if isinstance(lp, c_ast.For):
            lvars = _ids(lp.init) | _ids(lp.next)
            lvars &= _ids(lp.cond) | _ids(lp.next)
        else:
            lvars = _ids(lp.cond)
        for node in _walk(lp):
            if not isinstance(node, c_ast.ArrayRef):
                continue
            root = _root(node)
            if not isinstance(root, c_ast.ID):
                continue
            n = root.name
            seq_like = n in buffer_params or (
                is_global(n) and not _is_const(globals_[n].type)
                and isinstance(_resolve(globals_[n].type, env), (c_ast.ArrayDecl, c_ast.PtrDecl))
            )
            if seq_like and _ids(node.subscript) & lvars:
                line = node.coord.line if node.coord else 0
                reasons.append(f"loop at line {lp.coord.line if lp.coord else line} iterates over the full "
                               f"input sequence '{n}'")
                break
        else:
            continue
        break

    return StreamingVerdict(not reasons, reasons)
