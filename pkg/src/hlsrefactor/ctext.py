"""Lexical helpers over raw or preprocessed C text.

Nothing here builds an AST. The scanners track comments, literals,
directive lines and bracket depth, which is enough to cut a file into
top-level chunks, locate function bodies by offset, and strip or compare
code at the token level.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

C_KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool _Complex _Imaginary bool""".split()
)

_ID = re.compile(r"[A-Za-z_]\w*")
_NUM = re.compile(r"\.?\d(?:[eEpP][+-]|[\w.])*")
_STR = re.compile(r'"(?:\\.|[^"\\\n])*"')
_CHR = re.compile(r"'(?:\\.|[^'\\\n])*'")
_PUNCT = re.compile(
    r"<<=|>>=|\.\.\.|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\||[-+*/%&|^]=|##|[^\s\w]"
)
_DIRECTIVE = re.compile(r"#(?:\\\n|[^\n])*")


class Token(NamedTuple):
    kind: str  # id | num | str | char | punct | directive
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Split C source into tokens, dropping comments and whitespace.

    A ``#`` that is the first non-blank character on a line starts a
    directive token spanning the whole logical line.
    """
    out: list[Token] = []
    i, n = 0, len(text)
    line_start = True
    while i < n:
        c = text[i]
        if c == "\n":
            line_start = True
            i += 1
            continue
        if c in " \t\r\f\v":
            i += 1
            continue
        if c == "\\" and text.startswith("\\\n", i):
            i += 2
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            i = n if j < 0 else j + 2
            continue
        if c == "#" and line_start:
            m = _DIRECTIVE.match(text, i)
            out.append(Token("directive", m.group(0), i, m.end()))
            i = m.end()
            continue
        line_start = False
        for kind, rx in (("id", _ID), ("num", _NUM), ("str", _STR), ("char", _CHR)):
            if kind == "id" and not (c.isalpha() or c == "_"):
                continue
            if kind == "num" and not (c.isdigit() or (c == "." and text[i + 1 : i + 2].isdigit())):
                continue
            if kind == "str" and c != '"':
                continue
            if kind == "char" and c != "'":
                continue
            m = rx.match(text, i)
            if m:
                out.append(Token(kind, m.group(0), i, m.end()))
                i = m.end()
                break
        else:
            m = _PUNCT.match(text, i)
            out.append(Token("punct", m.group(0), i, m.end()))
            i = m.end()
    return out


def line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


@dataclass
class Chunk:
    """One top-level item of a C file.

    kind is ``function``, ``prototype``, ``include``, ``directive`` or ``decl``.
    For functions ``body_start``/``body_end`` delimit the braces (end exclusive)
    and ``header`` is the text from the first token up to the opening brace.
    """

    kind: str
    text: str
    start: int
    end: int
    line: int
    names: list[str] = field(default_factory=list)
    body_start: int = -1
    body_end: int = -1
    name_pos: int = -1
    header: str = ""

    @property
    def name(self) -> str | None:
        return self.names[0] if self.names else None

    @property
    def key(self) -> str:
        """Identity used when merging declarations from two versions of a file."""
        if self.names:
            return f"{self.kind}:{','.join(self.names)}"
        return "text:" + " ".join(t.text for t in tokenize(self.text))


def _match_backward(toks: list[Token], close_idx: int, open_ch: str, close_ch: str) -> int:
    depth = 0
    for k in range(close_idx, -1, -1):
        t = toks[k].text
        if t == close_ch:
            depth += 1
        elif t == open_ch:
            depth -= 1
            if depth == 0:
                return k
    return -1


def _declarator_names(toks: list[Token]) -> list[str]:
    """Names introduced by a top-level declaration (tokens without the final ';')."""
    if not toks:
        return []
    if toks[0].text == "typedef":
        names = []
        depth = 0
        for t in toks:
            if t.text in "([{":
                depth += 1
            elif t.text in ")]}":
                depth -= 1
            elif t.kind == "id" and t.text not in C_KEYWORDS:
                if depth == 0 or (depth == 1 and _in_paren_declarator(toks, t)):
                    names.append(t.text)
        return [names[-1]] if names else []
    # split into declarators at depth-0 commas
    parts: list[list[Token]] = [[]]
    depth = 0
    for t in toks:
        if t.text in "([{":
            depth += 1
        elif t.text in ")]}":
            depth -= 1
        if t.text == "," and depth == 0:
            parts.append([])
        else:
            parts[-1].append(t)
    names: list[str] = []
    for part in parts:
        depth = 0
        last = None
        tag = None
        for idx, t in enumerate(part):
            if t.text == "=" and depth == 0:
                break
            if t.text in "[{" and depth == 0 and last is not None:
                if t.text == "{" and tag and last == tag:
                    last = None
                break
            if t.text in "([{":
                depth += 1
            elif t.text in ")]}":
                depth -= 1
            elif t.kind == "id" and t.text not in C_KEYWORDS and depth <= 1:
                last = t.text
                if idx > 0 and part[idx - 1].text in ("struct", "union", "enum"):
                    tag = t.text
        if last is not None and last != tag:
            names.append(last)
        elif tag is not None:
            kw = next(p.text for p in part if p.text in ("struct", "union", "enum"))
            names.append(f"{kw} {tag}")
    return names


def _in_paren_declarator(toks: list[Token], tok: Token) -> bool:
    # typedef int (*handler_t)(int); the name sits inside the first parens after '*'
    k = toks.index(tok)
    return k > 0 and toks[k - 1].text == "*"


def _prototype_name(toks: list[Token]) -> str | None:
    if not toks or toks[0].text == "typedef":
        return None
    depth = 0
    for k, t in enumerate(toks):
        if t.text == "=" and depth == 0:
            return None
        if t.text in "[{":
            depth += 1
        elif t.text in "]}":
            depth -= 1
        elif t.text == "(" and depth == 0:
            prev = toks[k - 1] if k > 0 else None
            if prev is not None and prev.kind == "id" and prev.text not in C_KEYWORDS:
                return prev.text
            return None
    return None


def split_chunks(text: str) -> list[Chunk]:
    """Cut C text into top-level chunks in source order."""
    toks = tokenize(text)
    chunks: list[Chunk] = []
    prev_end = 0
    i = 0
    n = len(toks)

    def emit(kind: str, first: int, last: int, **kw) -> None:
        nonlocal prev_end
        start = toks[first].start
        # attach an immediately preceding comment block to the chunk
        gap = text[prev_end:start]
        lead = gap.rfind("\n\n")
        cstart = prev_end + (lead + 2 if lead >= 0 else 0)
        while cstart < start and text[cstart] in " \t\r\n":
            cstart += 1
        if "/*" not in text[cstart:start] and "//" not in text[cstart:start]:
            cstart = start
        end = toks[last].end
        chunks.append(
            Chunk(kind, text[cstart:end], cstart, end, line_of(text, cstart), **kw)
        )
        prev_end = end

    while i < n:
        t = toks[i]
        if t.kind == "directive":
            body = t.text[1:].lstrip()
            if body.startswith("include"):
                emit("include", i, i)
            else:
                m = re.match(r"define\s+([A-Za-z_]\w*)", body)
                emit("directive", i, i, names=[f"#{m.group(1)}"] if m else [])
            i += 1
            continue
        # scan one declaration or definition
        j = i
        brace = 0
        paren = 0
        saw_eq = False
        while j < n:
            tj = toks[j]
            if tj.kind == "directive" and brace == 0:
                break
            if tj.text == "(":
                paren += 1
            elif tj.text == ")":
                paren -= 1
            elif tj.text == "=" and brace == 0 and paren == 0:
                saw_eq = True
            elif tj.text == "{":
                if (
                    brace == 0
                    and not saw_eq
                    and j > i
                    and toks[j - 1].text == ")"
                ):
                    close = _find_close(toks, j)
                    opn = _match_backward(toks, j - 1, "(", ")")
                    name_tok = toks[opn - 1] if opn > 0 else None
                    # a parenthesised declarator like int (*f(void))[4] is not handled
                    name = name_tok.text if name_tok is not None and name_tok.kind == "id" else None
                    header = text[toks[i].start : tj.start].rstrip()
                    emit(
                        "function",
                        i,
                        close,
                        names=[name] if name else [],
                        body_start=tj.start,
                        body_end=toks[close].end,
                        name_pos=name_tok.start if name else -1,
                        header=header,
                    )
                    j = close + 1
                    break
                brace += 1
            elif tj.text == "}":
                brace -= 1
            elif tj.text == ";" and brace == 0 and paren == 0:
                decl = toks[i:j]
                proto = _prototype_name(decl)
                if proto is not None:
                    emit("prototype", i, j, names=[proto])
                else:
                    emit("decl", i, j, names=_declarator_names(decl))
                j += 1
                break
            j += 1
        else:
            # unterminated trailing text
            if j > i:
                emit("decl", i, n - 1)
            break
        if j == i:
            j += 1
        elif toks[j - 1].end > prev_end:
            # stopped at a directive inside an unterminated declaration
            emit("decl", i, j - 1)
        i = j
    return chunks


def _find_close(toks: list[Token], open_idx: int) -> int:
    depth = 0
    for k in range(open_idx, len(toks)):
        if toks[k].text == "{":
            depth += 1
        elif toks[k].text == "}":
            depth -= 1
            if depth == 0:
                return k
    return len(toks) - 1


def function_chunks(text: str) -> dict[str, Chunk]:
    return {c.name: c for c in split_chunks(text) if c.kind == "function" and c.name}


def prototype_of(chunk: Chunk) -> str:
    """Prototype text derived from a function definition's header."""
    return " ".join(chunk.header.split()) + ";"


def strip_pragmas(text: str) -> str:
    """Blank out ``#pragma`` lines, keeping line numbering intact."""
    lines = text.split("\n")
    return "\n".join("" if ln.lstrip().startswith("#pragma") else ln for ln in lines)


def code_tokens(text: str) -> list[str]:
    """Token texts with comments, whitespace and pragma lines removed."""
    return [
        t.text
        for t in tokenize(text)
        if not (t.kind == "directive" and t.text[1:].lstrip().startswith("pragma"))
    ]


def remove_chunks(text: str, chunks: list[Chunk]) -> str:
    out = []
    pos = 0
    for c in sorted(chunks, key=lambda c: c.start):
        out.append(text[pos : c.start])
        # keep newlines so later line numbers stay put
        out.append("\n" * c.text.count("\n"))
        pos = c.end
    out.append(text[pos:])
    return "".join(out)


def call_names(text: str) -> list[tuple[str, int]]:
    """Identifiers immediately followed by ``(`` (a crude call-site scan)."""
    toks = tokenize(text)
    out = []
    for k in range(len(toks) - 1):
        t = toks[k]
        if t.kind == "id" and toks[k + 1].text == "(" and t.text not in C_KEYWORDS:
            out.append((t.text, t.start))
    return out
