"""Reference slicers built on explicit dependence graphs.

These share only the IR, the alias model and control dependence with the
symbolic slicer.  Dependences come from classic reaching definitions,
interprocedural summaries from the worklist propagation over formal-out
vertices, and slices from graph reachability.

Vertices are instruction ids (ints) or tagged tuples:
``("entry", P)``, ``("fin", P, x)``, ``("fout", P, x)``,
``("ain", site, x)`` and ``("aout", site, x)``.  Names inside vertices
are unqualified: a formal or local of the procedure they belong to, a
global, or a return key.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import networkx as nx

from .callgraph import build_callgraph
from .cfg import Cfg, ControlDeps, build_cfg, control_deps
from .ir_model import (
    ExternalEffect, Function, Module, data_effect, load_effects, operand_reads, return_key,
)

Vertex = Hashable

CONTROL = "control"
FLOW = "flow"
CALL = "call"
PARAM_IN = "param-in"
PARAM_OUT = "param-out"
SUMMARY = "summary"


@dataclass
class Pdg:
    function: str
    vertices: set[Vertex]
    edges: set[tuple[Vertex, Vertex, str]]
    entry: Vertex

    def preds(self) -> dict[Vertex, list[Vertex]]:
        out: dict[Vertex, list[Vertex]] = {v: [] for v in self.vertices}
        for a, b, _ in self.edges:
            out[b].append(a)
        return out


@dataclass
class Sdg:
    module: Module
    vertices: set[Vertex] = field(default_factory=set)
    edges: set[tuple[Vertex, Vertex, str]] = field(default_factory=set)
    incoming: dict[Vertex, set[tuple[Vertex, str]]] = field(default_factory=dict)
    exit_defs: dict[str, dict[str, frozenset[Vertex]]] = field(default_factory=dict)
    fins: dict[str, set[str]] = field(default_factory=dict)
    fouts: dict[str, set[str]] = field(default_factory=dict)
    sites: dict[str, list[int]] = field(default_factory=dict)

    def add(self, a: Vertex, b: Vertex, kind: str) -> bool:
        if (a, b, kind) in self.edges:
            return False
        self.vertices.update((a, b))
        self.edges.add((a, b, kind))
        self.incoming.setdefault(b, set()).add((a, kind))
        return True

    def summary_edges(self) -> set[tuple[Vertex, Vertex]]:
        return {(a, b) for a, b, k in self.edges if k == SUMMARY}

    def graph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.vertices)
        for a, b, k in self.edges:
            g.add_edge(a, b, kind=k)
        return g


# ---------------------------------------------------------------------------
# reaching definitions

@dataclass
class _Event:
    vertex: Vertex
    uses: frozenset[str]
    defs: frozenset[str]


def _reaching(cfg: Cfg, block_events: dict[str, list[_Event]], entry_defs: dict[str, Vertex]
              ) -> tuple[list[tuple[Vertex, str, Vertex]], dict[str, dict[str, frozenset]]]:
    """Def-use pairs (def vertex, name, use vertex) and definitions live at each block's end."""
    out_rd: dict[str, dict[str, frozenset]] = {b: {} for b in cfg.block_order}
    entry = cfg.block_order[0]
    changed = True
    while changed:
        changed = False
        for b in cfg.block_order:
            rd: dict[str, set] = {}
            if b == entry:
                for x, v in entry_defs.items():
                    rd[x] = {v}
            for p in cfg.block_preds[b]:
                for x, vs in out_rd[p].items():
                    rd.setdefault(x, set()).update(vs)
            for ev in block_events[b]:
                for x in ev.defs:
                    rd[x] = {ev.vertex}
            frozen = {x: frozenset(vs) for x, vs in rd.items()}
            if frozen != out_rd[b]:
                out_rd[b] = frozen
                changed = True
    pairs = []
    for b in cfg.block_order:
        rd = {}
        if b == entry:
            rd = {x: {v} for x, v in entry_defs.items()}
        for p in cfg.block_preds[b]:
            for x, vs in out_rd[p].items():
                rd.setdefault(x, set()).update(vs)
        for ev in block_events[b]:
            for x in ev.uses:
                pairs.extend((d, x, ev.vertex) for d in rd.get(x, ()))
            for x in ev.defs:
                rd[x] = {ev.vertex}
    return pairs, out_rd


def _plain_events(f: Function, cfg: Cfg, effects) -> dict[str, list[_Event]]:
    out = {}
    for b in cfg.block_order:
        evs = []
        for ins in f.block_of[b].instructions:
            eff = data_effect(f, ins, effects)
            evs.append(_Event(ins.id, eff.reads, eff.writes))
        out[b] = evs
    return out


# ---------------------------------------------------------------------------
# PDG

def build_pdg(function: Function, cfg: Cfg | None = None, cd: ControlDeps | None = None,
              effects: dict[str, ExternalEffect] | None = None) -> Pdg:
    """Intraprocedural dependence graph.  Calls are treated as plain
    instructions that read their arguments and define their result."""
    cfg = cfg or build_cfg(function)
    cd = cd or control_deps(cfg, function)
    effects = effects if effects is not None else load_effects()
    entry: Vertex = ("entry", function.name)
    pdg = Pdg(function.name, {entry, *cfg.nodes}, set(), entry)
    for v in cfg.nodes:
        pdg.edges.update((j, v, CONTROL) for j in cd.cd.get(v, frozenset()))
        if v in cd.from_entry:
            pdg.edges.add((entry, v, CONTROL))
    pairs, _ = _reaching(cfg, _plain_events(function, cfg, effects), {})
    pdg.edges.update((d, u, FLOW) for d, _, u in pairs)
    return pdg


def bruteforce_closure(pdg: Pdg, v: int) -> frozenset[int]:
    """Every instruction with a dependence path to v (v included)."""
    preds = pdg.preds()
    seen = {v}
    stack = [v]
    while stack:
        for w in preds.get(stack.pop(), ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return frozenset(x for x in seen if type(x) is int)


# ---------------------------------------------------------------------------
# SDG

def _interface_globals(module: Module, cg) -> dict[str, set[str]]:
    glob = {f.name: {op.value for ins in f.instructions() for op in ins.operands
                     if op.value in module.global_names} for f in module.functions}
    changed = True
    while changed:
        changed = False
        for a, b, _ in cg.edges:
            extra = glob[b] - glob[a]
            if extra:
                glob[a] |= extra
                changed = True
    return glob


def _exit_reaching_blocks(cfg: Cfg) -> set[str]:
    g = nx.DiGraph()
    g.add_nodes_from(cfg.block_order)
    for a in cfg.block_order:
        g.add_edges_from((a, s) for s in cfg.block_succs[a])
    out = set(cfg.exit_blocks)
    for b in cfg.exit_blocks:
        out |= nx.ancestors(g, b)
    return out


def _modified(module: Module, cg, cfgs, glob, effects) -> dict[str, set[str]]:
    """Formals and globals each procedure may overwrite before returning."""
    mod: dict[str, set[str]] = {f.name: set() for f in module.functions}
    live = {f.name: _exit_reaching_blocks(cfgs[f.name]) for f in module.functions}
    iface = {f.name: set(f.formals) | glob[f.name] for f in module.functions}
    changed = True
    while changed:
        changed = False
        for f in module.functions:
            found = set()
            for b in live[f.name]:
                for ins in f.block_of[b].instructions:
                    if ins.is_call and ins.callee in module.function_map:
                        q = module.function(ins.callee)
                        for y, actual in zip(q.formals, ins.operands):
                            if y in mod[q.name] and actual.is_name:
                                found.add(f.memory_object(actual.value))
                        found |= mod[q.name] & module.global_names
                    else:
                        found |= data_effect(f, ins, effects).writes
            found &= iface[f.name]
            if not found <= mod[f.name]:
                mod[f.name] |= found
                changed = True
    return mod


def build_sdg(module: Module, effects: dict[str, ExternalEffect] | None = None) -> Sdg:
    effects = effects if effects is not None else load_effects()
    cg = build_callgraph(module)
    cfgs = {f.name: build_cfg(f) for f in module.functions}
    cds = {f.name: control_deps(cfgs[f.name], f) for f in module.functions}
    glob = _interface_globals(module, cg)
    mod = _modified(module, cg, cfgs, glob, effects)
    sdg = Sdg(module)
    for f in module.functions:
        sdg.fins[f.name] = set(f.formals) | glob[f.name]
        sdg.fouts[f.name] = set(mod[f.name])
        if f.returns_value:
            sdg.fouts[f.name].add(return_key(f.name))
        sdg.sites[f.name] = []
    for caller, callee, site in cg.edges:
        sdg.sites[callee].append(site)

    for f in module.functions:
        P = f.name
        cfg, cd = cfgs[P], cds[P]
        entry = ("entry", P)
        sdg.vertices.add(entry)
        for x in sorted(sdg.fins[P]):
            sdg.add(entry, ("fin", P, x), CONTROL)
        for x in sorted(sdg.fouts[P]):
            sdg.add(entry, ("fout", P, x), CONTROL)
        for v in cfg.nodes:
            sdg.vertices.add(v)
            for j in cd.cd.get(v, frozenset()):
                sdg.add(j, v, CONTROL)
            if v in cd.from_entry:
                sdg.add(entry, v, CONTROL)

        events: dict[str, list[_Event]] = {}
        for b in cfg.block_order:
            evs = []
            for ins in f.block_of[b].instructions:
                if not (ins.is_call and ins.callee in module.function_map):
                    eff = data_effect(f, ins, effects)
                    evs.append(_Event(ins.id, eff.reads, eff.writes))
                    continue
                q = module.function(ins.callee)
                evs.append(_Event(ins.id, frozenset(), frozenset()))
                sdg.add(ins.id, ("entry", q.name), CALL)
                for y, actual in zip(q.formals, ins.operands):
                    ain = ("ain", ins.id, y)
                    sdg.add(ins.id, ain, CONTROL)
                    sdg.add(ain, ("fin", q.name, y), PARAM_IN)
                    evs.append(_Event(ain, frozenset(operand_reads(f, actual)), frozenset()))
                for g in sorted(sdg.fins[q.name] - set(q.formals)):
                    ain = ("ain", ins.id, g)
                    sdg.add(ins.id, ain, CONTROL)
                    sdg.add(ain, ("fin", q.name, g), PARAM_IN)
                    evs.append(_Event(ain, frozenset({g}), frozenset()))
                outs: list[tuple[str, str]] = []
                for y, actual in zip(q.formals, ins.operands):
                    if y in sdg.fouts[q.name] and actual.is_name:
                        outs.append((y, f.memory_object(actual.value)))
                for g in sorted(sdg.fouts[q.name] & module.global_names):
                    outs.append((g, g))
                rk = return_key(q.name)
                if ins.result and rk in sdg.fouts[q.name]:
                    outs.append((rk, ins.result))
                for y, target in outs:
                    aout = ("aout", ins.id, y)
                    sdg.add(ins.id, aout, CONTROL)
                    sdg.add(("fout", q.name, y), aout, PARAM_OUT)
                    evs.append(_Event(aout, frozenset(), frozenset({target})))
            events[b] = evs
        entry_defs = {x: ("fin", P, x) for x in sdg.fins[P]}
        pairs, out_rd = _reaching(cfg, events, entry_defs)
        for d, _, u in pairs:
            sdg.add(d, u, FLOW)
        at_exit: dict[str, set] = {}
        for b in cfg.exit_blocks:
            for x, vs in out_rd[b].items():
                at_exit.setdefault(x, set()).update(vs)
        sdg.exit_defs[P] = {x: frozenset(vs) for x, vs in at_exit.items()}
        for x in sdg.fouts[P]:
            for d in at_exit.get(x, ()):
                sdg.add(d, ("fout", P, x), FLOW)

    _summaries(sdg)
    return sdg


def _summaries(sdg: Sdg) -> None:
    """Same-level formal-in to formal-out reachability, lifted to call sites."""
    intra = (CONTROL, FLOW, SUMMARY)
    path: set[tuple[Vertex, Vertex]] = set()
    reach_from: dict[Vertex, set[Vertex]] = {}
    work: deque[tuple[Vertex, Vertex]] = deque()

    def propagate(v, target):
        if (v, target) not in path:
            path.add((v, target))
            reach_from.setdefault(v, set()).add(target)
            work.append((v, target))

    for p, outs in sdg.fouts.items():
        for x in outs:
            propagate(("fout", p, x), ("fout", p, x))
    while work:
        v, target = work.popleft()
        if isinstance(v, tuple) and v[0] == "fin":
            _, q, y = v
            x = target[2]
            for site in sdg.sites[q]:
                ain, aout = ("ain", site, y), ("aout", site, x)
                if ain in sdg.vertices and aout in sdg.vertices and sdg.add(ain, aout, SUMMARY):
                    for t in list(reach_from.get(aout, ())):
                        propagate(ain, t)
            continue
        for w, kind in list(sdg.incoming.get(v, ())):
            if kind in intra:
                propagate(w, target)


def _backward(sdg: Sdg, start: Iterable[Vertex], skip: tuple[str, ...]) -> set[Vertex]:
    seen = set(start)
    stack = list(seen)
    while stack:
        v = stack.pop()
        for w, kind in sdg.incoming.get(v, ()):
            if kind not in skip and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def criterion_vertices(sdg: Sdg, function: str, var: str) -> frozenset[Vertex]:
    """Definitions of var that reach the end of the procedure; naming the
    procedure itself selects its return value."""
    if var == function:
        var = return_key(function)
    return sdg.exit_defs.get(function, {}).get(var, frozenset())


def sdg_backward_slice(sdg: Sdg, start: Vertex | Iterable[Vertex]) -> frozenset[int]:
    """Two-phase reachability: first without descending into callees
    through parameter-out edges, then without ascending to callers."""
    if isinstance(start, (int, tuple)):
        start = [start]
    phase1 = _backward(sdg, start, (PARAM_OUT,))
    phase2 = _backward(sdg, phase1, (CALL, PARAM_IN))
    return frozenset(v for v in phase2 if type(v) is int)


def sdg_slice(sdg: Sdg, function: str, var: str) -> frozenset[int]:
    return sdg_backward_slice(sdg, criterion_vertices(sdg, function, var))


def weiser_slice(module: Module, criterion: tuple[str, str], sdg: Sdg | None = None,
                 effects: dict[str, ExternalEffect] | None = None) -> frozenset[int]:
    """Context-insensitive slice: dependences are followed into callees and
    back out to every caller with no matching of call and return."""
    sdg = sdg or build_sdg(module, effects)
    function, var = criterion
    seen = _backward(sdg, criterion_vertices(sdg, function, var), (SUMMARY,))
    return frozenset(v for v in seen if type(v) is int)
