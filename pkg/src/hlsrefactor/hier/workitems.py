"""Per-function work items in bottom-up order."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from hlsrefactor import ctext
from hlsrefactor.cfront import CallGraph, SourceUnit, get_signature
from hlsrefactor.design import Design
from hlsrefactor.hier.order import work_units
from hlsrefactor.hier.testgen import UnitTest


class Stage(str, enum.Enum):
    STREAMING = "Streaming"
    REFACTOR = "Refactor"
    OPTIMIZE = "Optimize"
    DONE = "Done"


OUTER_KINDS = ("streaming", "refactor")


@dataclass
class HistoryEntry:
    """One prompt issued for the item and what came of it.

    ``kind`` is streaming/refactor for outer prompts, inner for compile
    retries and optimize/optimize_retry for the pragma stage.
    """

    candidate: str
    outcome: dict
    kind: str = "refactor"


@dataclass
class WorkItem:
    function: str
    current_source: str
    pinned_child_signatures: list[str]
    includes: list[str]
    unit_test: UnitTest | None
    stage: Stage = Stage.REFACTOR
    history: list[HistoryEntry] = field(default_factory=list)
    members: list[str] = field(default_factory=list)
    children: list[str] = field(default_factory=list)
    recursive: bool = False
    is_top: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def iteration(self) -> int:
        """Outer refactor prompts issued so far."""
        return sum(1 for h in self.history if h.kind in OUTER_KINDS)

    @property
    def seeded_diagnostics(self) -> list[str]:
        return ["Recursion"] if self.recursive else []


def child_signature(design: Design | None, g: CallGraph, name: str) -> str:
    """Latest accepted prototype of ``name``; the parsed one if not yet rewritten."""
    if design is not None and name in design.entries:
        chunks = [c for c in ctext.split_chunks(design.function_text(name)) if c.kind == "function"]
        if chunks:
            return ctext.prototype_of(chunks[0])
    return get_signature(g.functions[name])


def pinned_for(g: CallGraph, members: list[str], design: Design | None = None) -> tuple[list[str], list[str]]:
    children: list[str] = []
    for m in members:
        for c in g.callees(m):
            if c not in members and c not in children:
                children.append(c)
    children.sort(key=lambda c: g.functions[c].source_index)
    return children, [child_signature(design, g, c) for c in children]


def make_work_items(
    g: CallGraph,
    unit: SourceUnit,
    tests: dict[str, UnitTest | None],
    design: Design | None = None,
    streaming: bool = False,
) -> list[WorkItem]:
    """WorkItems leaves first; the top item carries the user's test.

    ``tests`` maps function name to its UnitTest, or to None for a function
    with a coverage gap (it is then only compile-checked).
    """
    design = design or Design.from_text(unit.raw_text)
    items = []
    for wu in work_units(g):
        children, sigs = pinned_for(g, wu.members, design)
        is_top = g.top in wu.members
        item = WorkItem(
            function=wu.name,
            current_source=design.visible_code(wu.name, wu.members),
            pinned_child_signatures=sigs,
            includes=list(design.includes),
            unit_test=tests.get(wu.name),
            stage=Stage.STREAMING if (is_top and streaming) else Stage.REFACTOR,
            members=list(wu.members),
            children=children,
            recursive=wu.recursive,
            is_top=is_top,
        )
        if item.unit_test is None:
            item.notes.append("CoverageGap: no captured calls; compile-only check")
        items.append(item)
    return items
