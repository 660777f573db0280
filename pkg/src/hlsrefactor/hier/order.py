"""Bottom-up ordering of the call graph."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from hlsrefactor.cfront import CallGraph


@dataclass
class WorkUnit:
    """One node of the condensed call graph.

    ``name`` is the representative function: for a recursive group it is the
    member called from outside the group (or the earliest defined one).
    """

    name: str
    members: list[str]
    recursive: bool


def work_units(g: CallGraph) -> list[WorkUnit]:
    """Strongly connected components of ``g`` in callee-before-caller order."""
    dg = g.to_networkx()
    src_index = {n: g.functions[n].source_index for n in g.nodes}
    cond = nx.condensation(dg)
    units: dict[int, WorkUnit] = {}
    for cid, data in cond.nodes(data=True):
        members = sorted(data["members"], key=src_index.__getitem__)
        recursive = len(members) > 1 or dg.has_edge(members[0], members[0])
        rep = members[0]
        if len(members) > 1:
            entered = [
                m for m in members
                if any(p not in data["members"] for p in dg.predecessors(m)) or m == g.top
            ]
            if entered:
                rep = min(entered, key=src_index.__getitem__)
        units[cid] = WorkUnit(rep, members, recursive)
    # edges callee -> caller so that a topological sort yields leaves first
    rev = cond.reverse(copy=True)
    order = nx.lexicographical_topological_sort(rev, key=lambda c: src_index[units[c].name])
    return [units[c] for c in order]


def topo_order(g: CallGraph) -> list[str]:
    """Function names, every callee before its callers; ties by source order."""
    return [u.name for u in work_units(g)]
