"""Raw-text view of a design and translation-unit composition.

The model always sees macro-preserving source, so the design is kept as
top-level chunks of the original file rather than as preprocessed text.
A translation unit for testing one function is stitched together from the
shared context, the accepted versions of its descendants, the candidate and
a test program.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from hlsrefactor import ctext
from hlsrefactor.ctext import Chunk


@dataclass
class Source:
    """A C file cut into includes, context chunks and function definitions."""

    includes: list[str]
    context: list[Chunk]
    functions: dict[str, Chunk]
    order: list[str]

    @classmethod
    def parse(cls, text: str) -> "Source":
        includes: list[str] = []
        context: list[Chunk] = []
        functions: dict[str, Chunk] = {}
        order: list[str] = []
        for c in ctext.split_chunks(text):
            if c.kind == "include":
                line = " ".join(c.text.split("\n")[-1].split())
                if line not in includes:
                    includes.append(line)
            elif c.kind == "function" and c.name:
                if c.name not in functions:
                    order.append(c.name)
                functions[c.name] = c
            else:
                context.append(c)
        return cls(includes, context, functions, order)

    def context_text(self, drop_prototypes_of=()) -> str:
        keep = [
            c.text for c in self.context
            if not (c.kind == "prototype" and c.name in drop_prototypes_of)
        ]
        return "\n".join(keep)


def merge_context(base: list[Chunk], extra: list[Chunk]) -> list[Chunk]:
    """Candidate chunks replace base chunks with the same key; new ones are appended."""
    out = list(base)
    index = {c.key: k for k, c in enumerate(out)}
    for c in extra:
        k = index.get(c.key)
        if k is None:
            index[c.key] = len(out)
            out.append(c)
        else:
            out[k] = c
    return out


@dataclass
class FunctionEntry:
    text: str
    owner: str


@dataclass
class Design:
    """Mutable working copy of a design as functions get accepted bottom-up."""

    includes: list[str]
    context: list[Chunk]
    entries: dict[str, FunctionEntry]
    order: list[str] = field(default_factory=list)

    @classmethod
    def from_text(cls, text: str) -> "Design":
        src = Source.parse(text)
        entries = {n: FunctionEntry(src.functions[n].text, n) for n in src.order}
        return cls(list(src.includes), list(src.context), entries, list(src.order))

    def function_text(self, name: str) -> str:
        return self.entries[name].text

    def owned_by(self, owners: set[str]) -> list[str]:
        return [n for n in self.order if self.entries[n].owner in owners]

    def visible_code(self, name: str, members=()) -> str:
        """What the model gets as the code to fix: context plus the function itself."""
        ctx = self.context_text()
        names = [n for n in self.order if n in set(members) | {name} or self.entries[n].owner == name]
        body = "\n\n".join(self.function_text(n) for n in names)
        return (ctx + "\n\n" + body).strip("\n") if ctx else body

    def context_text(self) -> str:
        names = set(self.entries)
        return "\n".join(
            c.text for c in self.context if not (c.kind == "prototype" and c.name in names)
        )

    def accept(self, name: str, candidate: Source, pinned: set[str]) -> None:
        """Fold an accepted candidate for ``name`` into the design."""
        self.context = merge_context(self.context, _context_only(candidate, self.entries))
        for inc in candidate.includes:
            if inc not in self.includes:
                self.includes.append(inc)
        for fn in candidate.order:
            if fn == "main" or fn in pinned:
                continue
            if fn in self.entries and self.entries[fn].owner not in (name, fn):
                continue
            if fn not in self.entries:
                # helpers the model introduced sit just before their owner
                self.order.insert(self.order.index(name), fn)
                self.entries[fn] = FunctionEntry(candidate.functions[fn].text, name)
            else:
                self.entries[fn] = FunctionEntry(candidate.functions[fn].text, self.entries[fn].owner)

    def full_text(self) -> str:
        parts = list(self.includes)
        ctx = self.context_text()
        if ctx:
            parts.append(ctx)
        parts += [self.entries[n].text for n in self.order]
        return "\n\n".join(parts) + "\n"


def _context_only(candidate: Source, entries) -> list[Chunk]:
    names = set(entries) | set(candidate.functions)
    return [c for c in candidate.context if not (c.kind == "prototype" and c.name in names)]


def strip_functions(candidate: Source, names: set[str]) -> Source:
    keep = [n for n in candidate.order if n not in names]
    return Source(
        list(candidate.includes),
        list(candidate.context),
        {n: candidate.functions[n] for n in keep},
        keep,
    )


def compose_tu(
    design: Design,
    target: str,
    descendants: set[str],
    candidate: Source | None = None,
    test_text: str | None = None,
) -> str:
    """One translation unit: context, prototypes, accepted children, target, test.

    ``descendants`` are the function names whose accepted code (and the
    helpers they own) is linked in. When ``candidate`` is None the design's
    current text for ``target`` is used.
    """
    if candidate is None:
        candidate = Source([], [], {target: _fake_chunk(design.function_text(target))}, [target])
        for fn in design.order:
            if design.entries[fn].owner == target and fn != target:
                candidate.functions[fn] = _fake_chunk(design.function_text(fn))
                candidate.order.insert(candidate.order.index(target), fn)
    dep_names = [n for n in design.order if design.entries[n].owner in descendants and n not in candidate.functions]
    cand_names = [n for n in candidate.order if n != "main"]

    includes = list(design.includes)
    for inc in candidate.includes:
        if inc not in includes:
            includes.append(inc)
    context = merge_context(design.context, _context_only(candidate, design.entries))
    all_fn = set(design.entries) | set(candidate.functions)

    out: list[str] = list(includes)
    out += [c.text for c in context if not (c.kind == "prototype" and c.name in all_fn)]
    protos = []
    for n in dep_names:
        protos.append(_prototype(design.function_text(n)))
    for n in cand_names:
        protos.append(_prototype(candidate.functions[n].text))
    out += [p for p in protos if p]
    out += [design.function_text(n) for n in dep_names]
    for n in cand_names:
        c = candidate.functions[n]
        if c.line > 0 and c.start >= 0 and not getattr(c, "_fake", False):
            out.append(f'#line {c.line} "candidate.c"')
        out.append(c.text)
    if test_text is not None:
        out.append('#line 1 "test.c"')
        out.append(test_text)
    return "\n".join(out) + "\n"


def _prototype(fn_text: str) -> str | None:
    chunks = [c for c in ctext.split_chunks(fn_text) if c.kind == "function"]
    if not chunks:
        return None
    return ctext.prototype_of(chunks[0])


def _fake_chunk(text: str) -> Chunk:
    c = Chunk("function", text, -1, -1, 0)
    c._fake = True
    return c
