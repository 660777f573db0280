"""Prompt templates, in-context examples, error routing and code extraction."""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import yaml
from pycparser import CParser

from hlsrefactor.synth.lint import LintCategory, LintDiagnostic

TEST_LIMIT = 4000
TRUNCATION_MARKER = "/* ... test truncated ... */"


class MissingBinding(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


class NoCodeFound(ValueError):
    pass


class PromptRole(str, enum.Enum):
    RefactorSystem = "RefactorSystem"
    RefactorInitial = "RefactorInitial"
    RefactorIter = "RefactorIter"
    OptimizeSystem = "OptimizeSystem"
    OptimizeInitial = "OptimizeInitial"
    StreamingInitial = "StreamingInitial"


class ErrorClass(str, enum.Enum):
    CompileError = "CompileError"
    TestFailure = "TestFailure"
    SynthDynamicMemory = "SynthDynamicMemory"
    SynthRecursion = "SynthRecursion"
    SynthPointer = "SynthPointer"
    SynthFloat = "SynthFloat"
    SynthRedefinition = "SynthRedefinition"
    SynthOther = "SynthOther"


ICL_KEYS = ("streaming", "recursion", "interface_pointer", "floating_point", "redefinition")

# None: the tool message goes into the prompt on its own
ICL_FOR_CLASS: dict[ErrorClass, str | None] = {
    ErrorClass.CompileError: None,
    ErrorClass.TestFailure: None,
    ErrorClass.SynthDynamicMemory: None,
    ErrorClass.SynthRecursion: "recursion",
    ErrorClass.SynthPointer: "interface_pointer",
    ErrorClass.SynthFloat: "floating_point",
    ErrorClass.SynthRedefinition: "redefinition",
    ErrorClass.SynthOther: None,
}

_CATEGORY_CLASS = {
    LintCategory.DynamicMemory: ErrorClass.SynthDynamicMemory,
    LintCategory.Recursion: ErrorClass.SynthRecursion,
    LintCategory.InterfacePointer: ErrorClass.SynthPointer,
    LintCategory.FloatingPoint: ErrorClass.SynthFloat,
}

_TEMPLATE_FILES = {
    PromptRole.RefactorSystem: "refactor_system.txt",
    PromptRole.RefactorInitial: "refactor_initial.txt",
    # later rounds reuse the initial template with the new error bound
    PromptRole.RefactorIter: "refactor_initial.txt",
    PromptRole.OptimizeSystem: "optimize_system.txt",
    PromptRole.OptimizeInitial: "optimize_initial.txt",
}

PLACEHOLDERS = ("top_function", "code_to_fix", "includes", "signatures", "error_from_catapult", "test_code", "target")
# spellings used inside the stored texts
_ALIASES = {"code_to_optimize": "code_to_fix", "area|latency": "target"}
_PH = re.compile(
    r"<(" + "|".join(re.escape(n) for n in (*PLACEHOLDERS, *_ALIASES)) + r")>"
    r"|\{(" + "|".join(PLACEHOLDERS) + r")\}"
)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    role: PromptRole
    text: str

    def placeholders(self) -> list[str]:
        out = []
        for m in _PH.finditer(self.text):
            n = m.group(1) or m.group(2)
            n = _ALIASES.get(n, n)
            if n not in out:
                out.append(n)
        return out


@dataclass(frozen=True)
class IclAsset:
    key: str
    text: str


def _asset(*parts: str) -> str:
    return resources.files("hlsrefactor").joinpath("assets", *parts).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_template(role: PromptRole) -> PromptTemplate:
    if role == PromptRole.StreamingInitial:
        return PromptTemplate("streaming", role, _asset("icl", "streaming.txt"))
    name = _TEMPLATE_FILES[role]
    return PromptTemplate(name.removesuffix(".txt"), role, _asset("prompts", name))


@lru_cache(maxsize=None)
def icl_asset(key: str) -> IclAsset:
    if key not in ICL_KEYS:
        raise KeyError(key)
    return IclAsset(key, _asset("icl", f"{key}.txt"))


@lru_cache(maxsize=None)
def error_table() -> dict[str, list[tuple[re.Pattern, ErrorClass]]]:
    raw = yaml.safe_load(_asset("error_classes.yaml")) or {}
    return {
        section: [(re.compile(r["pattern"]), ErrorClass(r["class"])) for r in rows or []]
        for section, rows in raw.items()
    }


def render_template(tpl: PromptTemplate, bindings: dict[str, str]) -> str:
    for name in tpl.placeholders():
        if name not in bindings:
            raise MissingBinding(name)

    def sub(m):
        n = m.group(1) or m.group(2)
        return bindings[_ALIASES.get(n, n)]

    return _PH.sub(sub, tpl.text)


def render_system(kind: str) -> str:
    role = {"refactor": PromptRole.RefactorSystem, "optimize": PromptRole.OptimizeSystem}[kind]
    return load_template(role).text


def _truncate(text: str, limit: int) -> str:
    if limit and len(text) > limit:
        return text[:limit] + "\n" + TRUNCATION_MARKER
    return text


def _bindings(item, test_limit: int) -> dict[str, str]:
    test = item.unit_test.source_text if item.unit_test is not None else ""
    return {
        "top_function": item.function,
        "code_to_fix": item.current_source,
        "includes": "\n".join(item.includes),
        "signatures": "\n".join(item.pinned_child_signatures),
        "test_code": _truncate(test, test_limit),
    }


def render_asset(asset: IclAsset, item) -> str:
    return render_template(PromptTemplate(asset.key, PromptRole.StreamingInitial, asset.text),
                           {"top_function": item.function})


def render_refactor(item, error_text: str, icl: IclAsset | str | None = None, test_limit: int = TEST_LIMIT) -> list[dict]:
    if isinstance(icl, str):
        icl = icl_asset(icl)
    err = error_text
    if icl is not None:
        err = f"{error_text}\n{render_asset(icl, item)}" if error_text else render_asset(icl, item)
    b = _bindings(item, test_limit)
    b["error_from_catapult"] = err
    return [
        {"role": "system", "content": render_system("refactor")},
        {"role": "user", "content": render_template(load_template(PromptRole.RefactorInitial), b)},
    ]


def render_streaming(item, test_limit: int = TEST_LIMIT) -> list[dict]:
    """First prompt of the streaming stage: the streaming example sits in the problem slot."""
    return render_refactor(item, "", icl_asset("streaming"), test_limit)


def render_optimize(item, target: str, test_limit: int = TEST_LIMIT) -> list[dict]:
    b = _bindings(item, test_limit)
    b["target"] = str(getattr(target, "value", target)).lower()
    return [
        {"role": "system", "content": render_system("optimize")},
        {"role": "user", "content": render_template(load_template(PromptRole.OptimizeInitial), b)},
    ]


def class_for_category(cat: LintCategory | None) -> ErrorClass:
    return _CATEGORY_CLASS.get(cat, ErrorClass.SynthOther)


_LINT_TAG = re.compile(r"error: \[(\w+)\]")


def classify_error(source: str, text: str, diagnostic: LintDiagnostic | None = None) -> ErrorClass:
    """Total over any tool output; falls back to CompileError or SynthOther."""
    if diagnostic is not None and diagnostic.category is not None:
        return class_for_category(diagnostic.category)
    table = error_table()
    if source == "test":
        return ErrorClass.TestFailure
    if source == "compiler":
        for rx, cls in table.get("compiler", []):
            if rx.search(text):
                return cls
        return ErrorClass.CompileError
    m = _LINT_TAG.search(text)
    if m and m.group(1) in LintCategory.__members__:
        return class_for_category(LintCategory(m.group(1)))
    for rx, cls in table.get("synth", []):
        if rx.search(text):
            return cls
    return ErrorClass.SynthOther


# ---- extraction -------------------------------------------------------------

_FENCE = re.compile(r"^[ \t]*```[ \t]*([\w+#-]*)[^\n]*\n(.*?)^[ \t]*```", re.S | re.M)
_C_LABELS = {"", "c", "cpp", "c++", "cc", "h", "hpp", "cxx"}


def _fingerprint(code: str) -> str:
    return hashlib.sha256(" ".join(code.split()).encode()).hexdigest()


@lru_cache(maxsize=None)
def exemplar_fingerprints() -> frozenset:
    fps = set()
    for key in ICL_KEYS:
        for m in _FENCE.finditer(icl_asset(key).text):
            fps.add(_fingerprint(m.group(2)))
    return frozenset(fps)


def _with_includes(code: str, includes) -> str:
    have = {" ".join(ln.split()) for ln in code.split("\n") if ln.lstrip().startswith("#include")}
    missing = [inc for inc in includes if " ".join(inc.split()) not in have]
    code = code.strip("\n") + "\n"
    return "\n".join(missing) + "\n" + code if missing else code


_PRELUDE_TYPES = ("size_t", "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t",
              "uint32_t", "uint64_t", "bool", "FILE", "word", "BYTE", "WORD")
_PRELUDE = "".join(f"typedef int {t};\n" for t in _PRELUDE_TYPES)


def _parses(lines: list[str]) -> bool:
    body = "\n".join("" if ln.lstrip().startswith("#") else ln for ln in lines)
    if not re.search(r"[;}]", body):
        return False
    try:
        ast = CParser().parse(_PRELUDE + body, "<response>")
    except Exception:
        return False
    return len(ast.ext) > len(_PRELUDE_TYPES)


def extract_code(response_text: str, includes=()) -> str:
    """The last C fenced block, or failing that the longest region that parses."""
    blocks = [
        m.group(2) for m in _FENCE.finditer(response_text)
        if m.group(1).lower() in _C_LABELS and m.group(2).strip()
    ]
    fps = exemplar_fingerprints()
    blocks = [b for b in blocks if _fingerprint(b) not in fps]
    if blocks:
        return _with_includes(blocks[-1], includes)
    if "```" in response_text:
        raise NoCodeFound("no C code block in response")
    lines = response_text.split("\n")[:400]
    best = None
    for i in range(len(lines)):
        if best and len(lines) - i <= best[1] - best[0]:
            break
        for j in range(len(lines), i, -1):
            if best and j - i <= best[1] - best[0]:
                break
            if _parses(lines[i:j]):
                best = (i, j)
                break
    if best is None:
        raise NoCodeFound("response contains no parseable C")
    return _with_includes("\n".join(lines[best[0]:best[1]]), includes)
