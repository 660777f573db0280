"""C front end: preprocessing, parsing and call-graph extraction.

Parsing is done with pycparser on gcc-preprocessed text. System headers are
made digestible by defining the common GNU extension keywords away on the
preprocessor command line; user code that relies on other extensions fails
with a :class:`ParseError`.
"""

from __future__ import annotations

import bisect
import logging
import os
import re
import shlex
import subprocess
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from pathlib import Path

from pycparser import c_ast, c_generator, c_parser

from hlsrefactor import ctext

log = logging.getLogger(__name__)

GNU_NEUTRALIZERS = [
    "-D__attribute__(x)=",
    "-D__extension__=",
    "-D__restrict=",
    "-D__restrict__=",
    "-D__asm__(x)=",
    "-D__asm(x)=",
    "-D__inline=",
    "-D__inline__=",
    "-D__volatile__=",
    "-D__signed__=signed",
    "-D__builtin_va_list=int",
    "-D_Float128=double",
    "-D_Float64=double",
    "-D_Float32=float",
    "-D_Float64x=double",
    "-D_Float32x=double",
    "-D__float128=double",
]

DEFAULT_CPP_CMD = "gcc -E -std=c99"
MACRO_DENSITY_RATIO = 5.0

_MARKER = re.compile(r'^#\s*(?:line\s+)?(\d+)\s+"((?:\\.|[^"\\])*)"', re.M)


class PreprocessFailure(Exception):
    def __init__(self, returncode: int, stderr: str):
        super().__init__(f"preprocessor exited with {returncode}: {stderr.strip()}")
        self.returncode = returncode
        self.stderr = stderr


class ParseError(Exception):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
        self.message = message


class UnknownTop(Exception):
    pass


@dataclass(frozen=True)
class MacroDensity:
    """A function whose body grew by more than the threshold under macro expansion."""

    function: str
    raw_tokens: int
    expanded_tokens: int

    @property
    def ratio(self) -> float:
        return self.expanded_tokens / max(1, self.raw_tokens)

    def __str__(self) -> str:
        return (
            f"MacroDensity: {self.function} grows {self.ratio:.1f}x under macro expansion "
            f"({self.raw_tokens} -> {self.expanded_tokens} tokens)"
        )


@dataclass(frozen=True)
class DanglingCall:
    caller: str
    callee: str
    reason: str  # "external" or "indirect"

    def __str__(self) -> str:
        return f"DanglingCall: {self.caller} -> {self.callee} ({self.reason})"


@dataclass
class SourceUnit:
    path: str
    raw_text: str
    preprocessed_text: str = ""
    include_directives: list[str] = field(default_factory=list)
    notes: list[MacroDensity] = field(default_factory=list)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "SourceUnit":
        p = Path(path)
        raw = p.read_bytes().decode("utf-8")
        return cls(path=str(p), raw_text=raw)


@dataclass
class FunctionInfo:
    name: str
    return_type: str
    params: list[tuple[str, str]]
    body_span: tuple[int, int]
    callee_names: set[str]
    is_defined_here: bool
    call_counts: Counter = field(default_factory=Counter, compare=False)
    indirect_calls: list[str] = field(default_factory=list, compare=False)
    line: int = 0
    source_index: int = 0
    signature: str = ""
    storage: list[str] = field(default_factory=list)
    node: c_ast.Node | None = field(default=None, repr=False, compare=False)


@dataclass
class CallGraph:
    top: str
    nodes: set[str]
    edges: set[tuple[str, str]]
    edge_multiplicity: dict[tuple[str, str], int]
    functions: dict[str, FunctionInfo] = field(default_factory=dict, repr=False)
    warnings: list[DanglingCall] = field(default_factory=list)

    def callees(self, name: str) -> list[str]:
        return sorted(
            (c for (a, c) in self.edges if a == name),
            key=lambda c: self.functions[c].source_index,
        )

    def descendants(self, name: str) -> set[str]:
        seen: set[str] = set()
        todo = deque(self.callees(name))
        while todo:
            n = todo.popleft()
            if n in seen:
                continue
            seen.add(n)
            todo.extend(self.callees(n))
        seen.discard(name)
        return seen

    def to_networkx(self):
        import networkx as nx

        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g


def cpp_command(cpp_cmd: str | list[str] | None = None) -> list[str]:
    if cpp_cmd is None:
        cpp_cmd = DEFAULT_CPP_CMD
    if isinstance(cpp_cmd, str):
        cpp_cmd = shlex.split(cpp_cmd)
    return list(cpp_cmd)


def run_preprocessor(
    unit: SourceUnit,
    include_paths: list[str] | tuple[str, ...] = (),
    cpp_cmd: str | list[str] | None = None,
) -> SourceUnit:
    """Run the external C preprocessor over ``unit.raw_text``.

    The text is fed on stdin behind a ``#line`` directive so that line
    markers, and therefore every parser coordinate, name ``unit.path``.
    """
    if not unit.raw_text.strip():
        raise ValueError("raw_text is empty")
    cmd = cpp_command(cpp_cmd) + GNU_NEUTRALIZERS
    src_dir = os.path.dirname(os.path.abspath(unit.path))
    for inc in [src_dir, *include_paths]:
        cmd.append(f"-I{inc}")
    cmd += ["-x", "c", "-"]
    text = f'#line 1 "{unit.path}"\n' + unit.raw_text
    try:
        proc = subprocess.run(
            cmd,
            input=text,
            capture_output=True,
            text=True,
            env={**os.environ, "LC_ALL": "C"},
        )
    except FileNotFoundError as exc:
        raise PreprocessFailure(127, str(exc)) from exc
    if proc.returncode != 0:
        raise PreprocessFailure(proc.returncode, proc.stderr)
    includes = [
        c.text.strip() for c in ctext.split_chunks(unit.raw_text) if c.kind == "include"
    ]
    out = replace(
        unit,
        preprocessed_text=proc.stdout,
        include_directives=includes,
        notes=[],
    )
    out.notes = _macro_density(unit.raw_text, proc.stdout, unit.path)
    for note in out.notes:
        log.warning("%s", note)
    return out


def _macro_density(raw: str, expanded: str, path: str) -> list[MacroDensity]:
    raw_fns = ctext.function_chunks(raw)
    files = _FileMap(expanded)
    notes = []
    for c in ctext.split_chunks(expanded):
        if c.kind != "function" or c.name not in raw_fns or files.file_at(c.start) != path:
            continue
        r = raw_fns[c.name]
        n_raw = len(ctext.tokenize(raw[r.body_start : r.body_end]))
        n_exp = len(ctext.tokenize(expanded[c.body_start : c.body_end]))
        if n_exp > MACRO_DENSITY_RATIO * n_raw:
            notes.append(MacroDensity(c.name, n_raw, n_exp))
    return notes


class _FileMap:
    """Maps offsets in preprocessed text to the file named by the last line marker."""

    def __init__(self, text: str):
        self.offsets: list[int] = []
        self.files: list[str] = []
        for m in _MARKER.finditer(text):
            self.offsets.append(m.start())
            self.files.append(m.group(2))

    def file_at(self, pos: int) -> str | None:
        k = bisect.bisect_right(self.offsets, pos) - 1
        return self.files[k] if k >= 0 else None


def parse_text(text: str, filename: str = "<unit>") -> c_ast.FileAST:
    """Parse preprocessed C text, mapping pycparser failures to :class:`ParseError`."""
    try:
        return c_parser.CParser().parse(text, filename)
    except c_parser.ParseError as exc:
        msg = str(exc)
        loc, _, detail = msg.rpartition(": ")
        if "__" in detail or "__" in msg.split(":")[-1]:
            detail += " (GNU extensions are not supported; write C99)"
        raise ParseError(loc, detail) from exc
    except Exception as exc:  # pycparser raises plain errors on some malformed input
        raise ParseError("", str(exc)) from exc


_gen = c_generator.CGenerator()


def type_text(node: c_ast.Node) -> str:
    """C type of a declarator subtree without its name, e.g. ``int [16]``."""
    return _gen._generate_type(node, emit_declname=False)


def decl_text(decl: c_ast.Node) -> str:
    return _gen.visit(decl)


def param_list(fdecl: c_ast.FuncDecl) -> list[tuple[str, str]]:
    params: list[tuple[str, str]] = []
    if fdecl.args is None:
        return params
    for p in fdecl.args.params:
        if isinstance(p, c_ast.EllipsisParam):
            params.append(("...", "..."))
            continue
        t = type_text(p.type)
        if t == "void" and p.name is None and len(fdecl.args.params) == 1:
            return []
        params.append((p.name or "", t))
    return params


class _CallCollector(c_ast.NodeVisitor):
    def __init__(self, known: set[str]):
        self.known = known
        self.calls: Counter = Counter()
        self.indirect: list[str] = []

    def visit_FuncCall(self, node: c_ast.FuncCall) -> None:
        if isinstance(node.name, c_ast.ID) and node.name.name in self.known:
            self.calls[node.name.name] += 1
        else:
            self.indirect.append(_gen.visit(node.name))
        self.generic_visit(node)


def declared_function_names(ast: c_ast.FileAST) -> set[str]:
    names = set()
    for ext in ast.ext:
        if isinstance(ext, c_ast.FuncDef):
            names.add(ext.decl.name)
        elif isinstance(ext, c_ast.Decl) and isinstance(ext.type, c_ast.FuncDecl):
            names.add(ext.name)
    return names


def parse_unit(unit: SourceUnit) -> list[FunctionInfo]:
    """One FunctionInfo per function defined in the unit's own file.

    Prototypes in the unit's file without a matching definition yield
    entries with ``is_defined_here = False``.
    """
    text = unit.preprocessed_text
    if not text.strip():
        return []
    ast = parse_text(text, unit.path)
    return functions_from_ast(ast, text, unit.path)


def parse_unit_ast(unit: SourceUnit) -> tuple[c_ast.FileAST, list[FunctionInfo]]:
    ast = parse_text(unit.preprocessed_text or "", unit.path)
    return ast, functions_from_ast(ast, unit.preprocessed_text, unit.path)


def functions_from_ast(ast: c_ast.FileAST, text: str, path: str | None) -> list[FunctionInfo]:
    known = declared_function_names(ast)
    files = _FileMap(text)
    spans: dict[str, tuple[int, int]] = {}
    for c in ctext.split_chunks(text):
        if c.kind == "function" and c.name and (path is None or files.file_at(c.start) in (path, None)):
            spans[c.name] = (c.body_start, c.body_end)

    def in_unit(node: c_ast.Node) -> bool:
        return path is None or node.coord is None or node.coord.file == path

    out: list[FunctionInfo] = []
    defined = set()
    for ext in ast.ext:
        if isinstance(ext, c_ast.FuncDef) and in_unit(ext):
            decl = ext.decl
            col = _CallCollector(known)
            col.visit(ext.body)
            defined.add(decl.name)
            out.append(
                FunctionInfo(
                    name=decl.name,
                    return_type=type_text(decl.type.type),
                    params=param_list(decl.type),
                    body_span=spans.get(decl.name, (0, 0)),
                    callee_names=set(col.calls),
                    is_defined_here=True,
                    call_counts=col.calls,
                    indirect_calls=col.indirect,
                    line=decl.coord.line if decl.coord else 0,
                    source_index=len(out),
                    signature=decl_text(decl) + ";",
                    storage=list(decl.storage),
                    node=ext,
                )
            )
    for ext in ast.ext:
        if (
            isinstance(ext, c_ast.Decl)
            and isinstance(ext.type, c_ast.FuncDecl)
            and in_unit(ext)
            and ext.name not in defined
        ):
            defined.add(ext.name)
            out.append(
                FunctionInfo(
                    name=ext.name,
                    return_type=type_text(ext.type.type),
                    params=param_list(ext.type),
                    body_span=(0, 0),
                    callee_names=set(),
                    is_defined_here=False,
                    line=ext.coord.line if ext.coord else 0,
                    source_index=len(out),
                    signature=decl_text(ext) + ";",
                    storage=list(ext.storage),
                    node=ext,
                )
            )
    return out


def build_call_graph(functions: list[FunctionInfo], top: str) -> CallGraph:
    """Call graph restricted to defined functions reachable from ``top``."""
    defined = {f.name: f for f in functions if f.is_defined_here}
    if top not in defined:
        raise UnknownTop(f"top function {top!r} is not defined in the unit")
    nodes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    mult: dict[tuple[str, str], int] = {}
    warnings: list[DanglingCall] = []
    todo = deque([top])
    while todo:
        name = todo.popleft()
        if name in nodes:
            continue
        nodes.add(name)
        f = defined[name]
        for callee in sorted(f.callee_names):
            if callee in defined:
                edges.add((name, callee))
                mult[(name, callee)] = f.call_counts[callee]
                todo.append(callee)
            else:
                warnings.append(DanglingCall(name, callee, "external"))
        for target in f.indirect_calls:
            warnings.append(DanglingCall(name, target, "indirect"))
    for w in warnings:
        log.debug("%s", w)
    return CallGraph(
        top=top,
        nodes=nodes,
        edges=edges,
        edge_multiplicity=mult,
        functions={n: defined[n] for n in nodes},
        warnings=warnings,
    )


def get_signature(f: FunctionInfo) -> str:
    """Compilable prototype for ``f``, parameter names preserved."""
    if f.signature:
        return f.signature
    params = ", ".join(f"{t} {n}".strip() for n, t in f.params) or "void"
    return f"{f.return_type} {f.name}({params});"


def load_unit(
    path: str | os.PathLike,
    include_paths: list[str] | tuple[str, ...] = (),
    cpp_cmd: str | list[str] | None = None,
) -> tuple[SourceUnit, list[FunctionInfo]]:
    unit = run_preprocessor(SourceUnit.from_file(path), include_paths, cpp_cmd)
    return unit, parse_unit(unit)
