"""Call graph, strongly connected components and bottom-up order."""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .ir_model import Module


class UnknownCallee(Exception):
    def __init__(self, callee: str, site: int):
        super().__init__(f"call at instruction {site} to unknown procedure {callee}")
        self.callee = callee
        self.site = site


@dataclass
class CallGraph:
    nodes: list[str]
    edges: list[tuple[str, str, int]]
    externals: set[str] = field(default_factory=set)
    external_sites: list[tuple[str, str, int]] = field(default_factory=list)

    def callees(self, caller: str) -> list[str]:
        return sorted({b for a, b, _ in self.edges if a == caller})

    def callers(self, callee: str) -> list[str]:
        return sorted({a for a, b, _ in self.edges if b == callee})

    def sites_of(self, callee: str) -> list[tuple[str, int]]:
        return [(a, s) for a, b, s in self.edges if b == callee]

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from((a, b) for a, b, _ in self.edges)
        return g


def build_callgraph(module: Module) -> CallGraph:
    cg = CallGraph([f.name for f in module.functions], [])
    for f in module.functions:
        for ins in f.instructions():
            if not ins.is_call:
                continue
            if ins.callee in module.function_map:
                cg.edges.append((f.name, ins.callee, ins.id))
            elif ins.callee in module.external_map:
                cg.externals.add(ins.callee)
                cg.external_sites.append((f.name, ins.callee, ins.id))
            else:
                raise UnknownCallee(ins.callee or "?", ins.id)
    return cg


def scc_order(cg: CallGraph) -> list[frozenset[str]]:
    """SCCs with every callee's component before its callers'.

    Ties are broken by textual position so the order is reproducible.
    """
    g = cg.graph()
    position = {name: i for i, name in enumerate(cg.nodes)}
    cond = nx.condensation(g)
    members = cond.graph["mapping"]
    comps: dict[int, frozenset[str]] = {}
    for name, c in members.items():
        comps[c] = comps.get(c, frozenset()) | {name}
    order = nx.lexicographical_topological_sort(
        cond.reverse(copy=False), key=lambda c: min(position[n] for n in comps[c]))
    return [comps[c] for c in order]


def is_recursive(cg: CallGraph, scc: frozenset[str]) -> bool:
    if len(scc) > 1:
        return True
    (only,) = scc
    return any(a == only and b == only for a, b, _ in cg.edges)


def root_components(cg: CallGraph) -> list[frozenset[str]]:
    """Components no other component calls into."""
    called_from_outside: set[str] = set()
    sccs = scc_order(cg)
    comp_of = {n: c for c in sccs for n in c}
    for a, b, _ in cg.edges:
        if comp_of[a] != comp_of[b]:
            called_from_outside.add(b)
    return [c for c in sccs if not (c & called_from_outside)]
