"""Static HLS-compatibility lint.

Works on the preprocessed text of a candidate and inspects one target
function: its signature, its body, the struct types it touches, and its
place in the call graph.
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass, field

import networkx as nx
from pycparser import c_ast

from hlsrefactor.cfront import (
    CallGraph,
    SourceUnit,
    parse_text,
    run_preprocessor,
    type_text,
)
from hlsrefactor.hier.typeplan import TypeEnv, _resolve, const_eval


class LintCategory(str, enum.Enum):
    DynamicMemory = "DynamicMemory"
    Recursion = "Recursion"
    InterfacePointer = "InterfacePointer"
    UnsupportedStdlib = "UnsupportedStdlib"
    UnboundedStructure = "UnboundedStructure"
    MultiProcess = "MultiProcess"
    FloatingPoint = "FloatingPoint"
    UnboundedLoop = "UnboundedLoop"


# repair strategy per category; None means the error text is passed through as is
ICL_KEYS: dict[LintCategory, str | None] = {
    LintCategory.DynamicMemory: None,
    LintCategory.Recursion: "recursion",
    LintCategory.InterfacePointer: "interface_pointer",
    LintCategory.UnsupportedStdlib: None,
    LintCategory.UnboundedStructure: None,
    LintCategory.MultiProcess: None,
    LintCategory.FloatingPoint: "floating_point",
    LintCategory.UnboundedLoop: "streaming",
}

_ORDER = {c: k for k, c in enumerate(LintCategory)}


@dataclass(frozen=True)
class LintDiagnostic:
    category: LintCategory | None
    location: tuple[int, int]
    message: str
    icl_key: str | None = None
    file: str = ""

    def render(self) -> str:
        cat = self.category.value if self.category else "Synthesis"
        where = f"{self.file}:{self.location[0]}:{self.location[1]}"
        return f"{where}: error: [{cat}] {self.message}"


@dataclass
class SynthResult:
    ok: bool
    diagnostics: list[LintDiagnostic]
    tool_log: str
    adapter: str = "lint"

    @property
    def first_error(self) -> str:
        return self.diagnostics[0].render() if self.diagnostics else ""


@dataclass
class LintConfig:
    dynamic_memory: frozenset = frozenset({"malloc", "calloc", "realloc", "free", "alloca", "aligned_alloc"})
    stdlib: frozenset = frozenset({
        "printf", "fprintf", "sprintf", "snprintf", "vprintf", "vfprintf", "vsprintf", "vsnprintf",
        "puts", "fputs", "putchar", "fputc", "putc", "getchar", "getc", "fgetc", "gets", "fgets",
        "scanf", "fscanf", "sscanf", "fopen", "fclose", "fread", "fwrite", "fseek", "ftell",
        "fflush", "rewind", "remove", "rename", "perror", "exit", "_Exit", "abort", "atexit",
        "system", "getenv", "time", "clock", "signal", "raise", "setjmp", "longjmp",
    })
    multiprocess: frozenset = frozenset({
        "fork", "vfork", "wait", "waitpid", "popen", "pclose", "execl", "execlp", "execle",
        "execv", "execvp", "execve", "clone",
    })
    multiprocess_prefixes: tuple = ("pthread_", "thrd_", "mtx_", "cnd_", "sem_")

    @classmethod
    def from_dict(cls, d: dict | None) -> "LintConfig":
        d = d or {}
        cfg = cls()
        for key in ("dynamic_memory", "stdlib", "multiprocess"):
            if key in d:
                setattr(cfg, key, frozenset(d[key]))
        if "multiprocess_prefixes" in d:
            cfg.multiprocess_prefixes = tuple(d["multiprocess_prefixes"])
        return cfg


def preprocess_source(source: str, filename: str = "candidate.c", include_paths=(), cpp_cmd=None) -> str:
    unit = run_preprocessor(SourceUnit(filename, source), include_paths, cpp_cmd)
    return unit.preprocessed_text


def parse_source(source: str, filename: str = "candidate.c", include_paths=(), cpp_cmd=None) -> c_ast.FileAST:
    return parse_text(preprocess_source(source, filename, include_paths, cpp_cmd), filename)


def find_funcdef(ast: c_ast.FileAST, name: str) -> c_ast.FuncDef | None:
    found = None
    for ext in ast.ext:
        if isinstance(ext, c_ast.FuncDef) and ext.decl.name == name:
            found = ext
    return found


def _loc(node) -> tuple[str, int, int]:
    c = getattr(node, "coord", None)
    if c is None:
        return "", 0, 0
    return (os.path.basename(c.file or ""), c.line or 0, c.column or 0)


def _system_header(node) -> bool:
    # libc internals (FILE and friends) are the tool's business, not the design's
    f = getattr(getattr(node, "coord", None), "file", None) or ""
    return f.startswith(("/usr/", "/lib/"))


class _Linter:
    def __init__(self, ast: c_ast.FileAST, fdef: c_ast.FuncDef, cfg: LintConfig):
        self.ast = ast
        self.fdef = fdef
        self.cfg = cfg
        self.env = TypeEnv.from_ast(ast)
        self.diags: list[LintDiagnostic] = []

    def add(self, cat: LintCategory, node, msg: str) -> None:
        f, line, col = _loc(node)
        self.diags.append(LintDiagnostic(cat, (line, col), msg, ICL_KEYS[cat], f))

    # -- categories --------------------------------------------------------
    def calls(self) -> None:
        for node in _walk(self.fdef.body):
            if isinstance(node, c_ast.FuncCall) and isinstance(node.name, c_ast.ID):
                n = node.name.name
                if n in self.cfg.dynamic_memory:
                    self.add(LintCategory.DynamicMemory, node,
                             f"call to '{n}': hardware needs fixed-size storage, use a bounded array")
                elif n in self.cfg.multiprocess or n.startswith(self.cfg.multiprocess_prefixes):
                    self.add(LintCategory.MultiProcess, node,
                             f"call to '{n}': processes and threads cannot be synthesized")
                elif n in self.cfg.stdlib:
                    self.add(LintCategory.UnsupportedStdlib, node,
                             f"call to standard library function '{n}' is not supported")

    def pointers(self) -> None:
        fdecl = self.fdef.decl.type
        body = self.fdef.body
        for p in _params(fdecl):
            node = _resolve(p.type, self.env)
            if not isinstance(node, c_ast.PtrDecl):
                continue
            target = _resolve(node.type, self.env)
            why = None
            if isinstance(target, c_ast.PtrDecl):
                why = "pointer to pointer"
            elif isinstance(target, c_ast.FuncDecl):
                why = "function pointer"
            elif isinstance(target, c_ast.ArrayDecl):
                why = "pointer to array"
            elif isinstance(target, c_ast.TypeDecl) and isinstance(target.type, c_ast.IdentifierType) \
                    and target.type.names == ["void"]:
                why = "void pointer"
            else:
                why = _pointer_misuse(body, p.name)
            if why:
                self.add(LintCategory.InterfacePointer, p,
                         f"pointer parameter '{p.name}' ({why}); use array notation with a fixed size")

    def structures(self) -> None:
        fdecl = self.fdef.decl.type
        for p in _params(fdecl):
            self._vla(p.type, p, f"parameter '{p.name}'")
        for node in _walk(self.fdef.body):
            if isinstance(node, c_ast.Decl) and not isinstance(node.type, c_ast.FuncDecl):
                self._vla(node.type, node, f"variable '{node.name}'")
        seen = set()
        for tag in self._struct_tags():
            if tag in seen:
                continue
            seen.add(tag)
            st = self.env.structs.get(tag)
            if st is None or not st.decls or _system_header(st):
                continue
            last = st.decls[-1]
            if isinstance(last.type, c_ast.ArrayDecl) and last.type.dim is None:
                self.add(LintCategory.UnboundedStructure, last,
                         f"{tag} ends in a flexible array member '{last.name}'")
            for d in st.decls:
                if _points_to_tag(d.type, tag, self.env):
                    self.add(LintCategory.UnboundedStructure, d,
                             f"{tag} is self-referential through '{d.name}' (linked structure)")
                    break

    def _vla(self, tnode, node, what: str) -> None:
        cur = tnode
        while isinstance(cur, (c_ast.ArrayDecl, c_ast.PtrDecl)):
            if isinstance(cur, c_ast.ArrayDecl) and cur.dim is not None and const_eval(cur.dim, self.env) is None:
                self.add(LintCategory.UnboundedStructure, node, f"{what} is a variable-length array")
                return
            cur = cur.type

    def _struct_tags(self):
        for node in _walk(self.fdef):
            if isinstance(node, c_ast.Struct) and node.name:
                yield f"struct {node.name}"
            elif isinstance(node, c_ast.IdentifierType) and len(node.names) == 1:
                name = node.names[0]
                seen = 0
                t = self.env.typedefs.get(name)
                while t is not None and seen < 20:
                    seen += 1
                    inner = t
                    while isinstance(inner, (c_ast.PtrDecl, c_ast.ArrayDecl, c_ast.TypeDecl)):
                        inner = inner.type
                    if isinstance(inner, c_ast.Struct):
                        if inner.name:
                            yield f"struct {inner.name}"
                        break
                    if isinstance(inner, c_ast.IdentifierType) and len(inner.names) == 1:
                        t = self.env.typedefs.get(inner.names[0])
                    else:
                        break

    def floats(self) -> None:
        lines = set()
        for node in _walk(self.fdef):
            hit = False
            if isinstance(node, c_ast.IdentifierType):
                hit = self._is_float_names(node.names)
            elif isinstance(node, c_ast.Constant) and node.type in ("float", "double", "long double"):
                hit = True
            if hit:
                _, line, _ = _loc(node)
                if line in lines:
                    continue
                lines.add(line)
                self.add(LintCategory.FloatingPoint, node,
                         "floating-point arithmetic; use fixed-point (ac_fixed) or float (ac_float) types")

    def _is_float_names(self, names) -> bool:
        if any(n in ("float", "double") for n in names):
            return True
        if len(names) == 1 and names[0] in self.env.typedefs:
            t = _resolve(c_ast.TypeDecl(None, [], None, c_ast.IdentifierType(list(names))), self.env)
            return isinstance(t, c_ast.TypeDecl) and isinstance(t.type, c_ast.IdentifierType) \
                and any(n in ("float", "double") for n in t.type.names)
        return False

    def loops(self) -> None:
        for node in _walk(self.fdef.body):
            if isinstance(node, c_ast.While):
                self.add(LintCategory.UnboundedLoop, node,
                         "while loop without a compile-time trip count; use a for loop with a constant bound")
            elif isinstance(node, c_ast.DoWhile):
                self.add(LintCategory.UnboundedLoop, node,
                         "do-while loop without a compile-time trip count; use a for loop with a constant bound")
            elif isinstance(node, c_ast.For) and not _bounded_for(node, self.env):
                self.add(LintCategory.UnboundedLoop, node,
                         "loop bound is not a compile-time constant")

    def recursion(self, graph: CallGraph | None) -> None:
        g = nx.DiGraph()
        for ext in self.ast.ext:
            if isinstance(ext, c_ast.FuncDef):
                g.add_node(ext.decl.name)
                for node in _walk(ext.body):
                    if isinstance(node, c_ast.FuncCall) and isinstance(node.name, c_ast.ID):
                        g.add_edge(ext.decl.name, node.name.name)
        if graph is not None:
            g.add_edges_from(graph.edges)
        me = self.fdef.decl.name
        if me not in g:
            return
        cycle_mates = set()
        for comp in nx.strongly_connected_components(g):
            if me in comp and (len(comp) > 1 or g.has_edge(me, me)):
                cycle_mates = comp
        if not cycle_mates:
            return
        site = self.fdef.decl
        for node in _walk(self.fdef.body):
            if isinstance(node, c_ast.FuncCall) and isinstance(node.name, c_ast.ID) \
                    and node.name.name in cycle_mates:
                site = node
                break
        members = ", ".join(sorted(cycle_mates))
        self.add(LintCategory.Recursion, site,
                 f"'{me}' is recursive (cycle through {members}); rewrite it iteratively")


def _walk(node):
    if node is None:
        return
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        kids = [c for _, c in n.children()]
        stack.extend(reversed(kids))


def _params(fdecl: c_ast.FuncDecl) -> list:
    if fdecl.args is None:
        return []
    out = []
    for p in fdecl.args.params:
        if isinstance(p, c_ast.Decl) and p.name:
            out.append(p)
    return out


def _points_to_tag(tnode, tag: str, env: TypeEnv) -> bool:
    if not isinstance(tnode, c_ast.PtrDecl):
        return False
    inner = tnode.type
    while isinstance(inner, (c_ast.PtrDecl, c_ast.TypeDecl)):
        if isinstance(inner, c_ast.TypeDecl) and isinstance(inner.type, c_ast.IdentifierType):
            inner = _resolve(inner, env)
            if isinstance(inner, c_ast.TypeDecl) and isinstance(inner.type, c_ast.IdentifierType):
                return False
            continue
        inner = inner.type
    return isinstance(inner, c_ast.Struct) and inner.name is not None and f"struct {inner.name}" == tag


def _pointer_misuse(body, name: str) -> str | None:
    """Why a pointer parameter is more than a scalar out-port, or None."""
    if body is None:
        return None
    parents: dict[int, c_ast.Node] = {}
    uses = []
    for node in _walk(body):
        for _, child in node.children():
            parents[id(child)] = node
        if isinstance(node, c_ast.ID) and node.name == name:
            uses.append(node)
    for u in uses:
        par = parents.get(id(u))
        if isinstance(par, c_ast.ArrayRef) and par.name is u:
            return "indexed like an array"
        if isinstance(par, c_ast.BinaryOp) and par.op in ("+", "-"):
            return "pointer arithmetic"
        if isinstance(par, c_ast.UnaryOp) and par.op in ("++", "--", "p++", "p--"):
            return "pointer arithmetic"
        if isinstance(par, c_ast.Assignment) and par.lvalue is u:
            return "reassigned"
    return None


def _bounded_for(node: c_ast.For, env: TypeEnv) -> bool:
    cond = node.cond
    if not isinstance(cond, c_ast.BinaryOp) or cond.op not in ("<", "<=", ">", ">=", "!="):
        return False
    left, right = cond.left, cond.right
    if isinstance(left, c_ast.ID) and const_eval(right, env) is not None:
        var = left.name
    elif isinstance(right, c_ast.ID) and const_eval(left, env) is not None:
        var = right.name
    else:
        return False
    # the variable must be stepped in the loop header
    nxt = node.next
    for n in _walk(nxt):
        if isinstance(n, c_ast.ID) and n.name == var:
            return True
    return False


def lint(
    source: str,
    target_fn: str,
    graph: CallGraph | None = None,
    config: LintConfig | None = None,
    filename: str = "candidate.c",
    include_paths=(),
    cpp_cmd=None,
) -> SynthResult:
    """Diagnostics for ``target_fn`` in ``source``, ordered by location."""
    cfg = config or LintConfig()
    ast = parse_source(source, filename, include_paths, cpp_cmd)
    fdef = find_funcdef(ast, target_fn)
    if fdef is None:
        d = LintDiagnostic(None, (0, 0), f"function '{target_fn}' is not defined", None, filename)
        return SynthResult(False, [d], d.render(), "lint")
    lt = _Linter(ast, fdef, cfg)
    lt.calls()
    lt.recursion(graph)
    lt.pointers()
    lt.structures()
    lt.floats()
    lt.loops()
    seen = set()
    diags = []
    for d in sorted(lt.diags, key=lambda d: (d.location, _ORDER[d.category], d.message)):
        key = (d.category, d.location[0], d.message)
        if key in seen:
            continue
        seen.add(key)
        diags.append(d)
    log = "\n".join(d.render() for d in diags)
    return SynthResult(not diags, diags, log, "lint")


def lint_file(path, top: str, config: LintConfig | None = None, include_paths=()) -> SynthResult:
    from pathlib import Path

    p = Path(path)
    return lint(p.read_text(), top, None, config, p.name, [str(p.resolve().parent), *include_paths])


def top_comment(text: str) -> str | None:
    """The function named by a ``// top: name`` line, if any."""
    m = re.search(r"//\s*top:\s*(\w+)", text)
    return m.group(1) if m else None
