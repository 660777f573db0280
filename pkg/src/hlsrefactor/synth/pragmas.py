"""Classify HLS pragma lines in a candidate."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from hlsrefactor import ctext


class PragmaKind(str, enum.Enum):
    Unroll = "Unroll"
    PipelineInitInterval = "PipelineInitInterval"
    ArrayPartition = "ArrayPartition"
    Unknown = "Unknown"


EXACT = {
    "hls_unroll": PragmaKind.Unroll,
    "hls_pipeline_init_interval": PragmaKind.PipelineInitInterval,
    "hls_array_partition": PragmaKind.ArrayPartition,
}
SCORED = (PragmaKind.Unroll, PragmaKind.PipelineInitInterval)
_HLS_HINT = re.compile(r"hls|unroll|pipeline|partition", re.I)
_LOOP_START = re.compile(r"^(for|while|do)\b")


@dataclass(frozen=True)
class PragmaDirective:
    kind: PragmaKind
    argument: str
    loop_location: int | None
    recognized: bool
    line: int = 0
    text: str = ""


def _argument_ok(kind: PragmaKind, arg: str) -> bool:
    if kind == PragmaKind.Unroll:
        return arg == "yes" or (arg.isdigit() and int(arg) > 0)
    if kind == PragmaKind.PipelineInitInterval:
        return arg.isdigit()
    return True


def _code_lines(source: str) -> list[str]:
    """Source lines with comments blanked, line numbering kept."""
    out = []
    for ln in _strip_comments(source).split("\n"):
        out.append(ln.strip())
    return out


def _strip_comments(text: str) -> str:
    res = []
    i, n = 0, len(text)
    while i < n:
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            res.append("\n" * text.count("\n", i, j))
            i = j
        elif text[i] in "\"'":
            q = text[i]
            j = i + 1
            while j < n and text[j] != q and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            res.append(text[i:j + 1])
            i = j + 1
        else:
            res.append(text[i])
            i += 1
    return "".join(res)


def verify_pragmas(source: str) -> list[PragmaDirective]:
    """Every HLS-like ``#pragma`` line, with whether the tool would honour it."""
    lines = _code_lines(source)
    out = []
    for k, ln in enumerate(lines):
        m = re.match(r"#\s*pragma\s+(.*)$", ln)
        if not m:
            continue
        body = m.group(1).strip()
        if not _HLS_HINT.search(body):
            continue
        toks = body.split()
        head = toks[0] if toks else ""
        arg = toks[1] if len(toks) > 1 else ""
        kind = EXACT.get(head)
        exact = kind is not None
        if kind is None:
            low = body.lower()
            if "unroll" in low:
                kind = PragmaKind.Unroll
            elif "pipeline" in low:
                kind = PragmaKind.PipelineInitInterval
            elif "partition" in low:
                kind = PragmaKind.ArrayPartition
            else:
                kind = PragmaKind.Unknown
        loop_line = None
        for j in range(k + 1, len(lines)):
            nxt = lines[j]
            if not nxt or nxt.startswith("#"):
                continue
            if _LOOP_START.match(nxt):
                loop_line = j + 1
            break
        if kind == PragmaKind.ArrayPartition:
            recognized = exact
        else:
            recognized = exact and loop_line is not None and _argument_ok(kind, arg)
        out.append(PragmaDirective(kind, arg, loop_line, recognized, k + 1, ln))
    return out


def strip_pragmas(source: str) -> str:
    return ctext.strip_pragmas(source)


def scored(directives: list[PragmaDirective]) -> list[PragmaDirective]:
    return [d for d in directives if d.kind in SCORED and d.recognized]
