"""Control-flow graphs, postdominators and control dependence.

Graphs are built per basic block and lifted to instructions: every
instruction of a block shares the block's control dependences.  The
postdominator tree is rooted at a virtual exit node (id 0).

Loop predicates are treated as controlling the code after the loop: each
conditional branch that leaves a natural loop gets a synthetic edge to
the virtual exit, and a loop that never exits gets one from its header.
With those edges in place, everything reached after a loop is
control-dependent on the loop's exit tests, and every node reaches the
virtual exit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .ir_model import Diagnostic, Function

VIRTUAL_EXIT = 0
_VEXIT_BLOCK = "<exit>"  # key of the virtual exit in block graphs (not a valid label)


@dataclass
class Cfg:
    function: str
    nodes: list[int]
    edges: set[tuple[int, int]]
    entry: int
    exit: int = VIRTUAL_EXIT
    block_order: list[str] = field(default_factory=list)
    block_succs: dict[str, list[str]] = field(default_factory=dict)
    block_preds: dict[str, list[str]] = field(default_factory=dict)
    block_first: dict[str, int] = field(default_factory=dict)
    block_last: dict[str, int] = field(default_factory=dict)
    block_of_instr: dict[int, str] = field(default_factory=dict)
    exit_blocks: list[str] = field(default_factory=list)
    synthetic: set[str] = field(default_factory=set)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def successors(self, node: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == node)


@dataclass
class ControlDeps:
    cd: dict[int, frozenset[int]]
    infl: dict[int, frozenset[int]]
    # instructions that run whenever the procedure is entered
    from_entry: frozenset[int] = frozenset()


def _block_graph(function: Function) -> tuple[nx.DiGraph, set[str], list[Diagnostic]]:
    g = nx.DiGraph()
    for b in function.blocks:
        g.add_node(b.label)
    for b in function.blocks:
        for s in b.successors():
            if s in function.block_of:
                g.add_edge(b.label, s)
    reach = nx.descendants(g, function.entry) | {function.entry}
    diags = []
    for b in function.blocks:
        if b.label not in reach:
            first = b.instructions[0].id if b.instructions else None
            diags.append(Diagnostic(f"unreachable block {b.label} excluded from analysis",
                                    first, function.name))
    return g.subgraph(reach).copy(), reach, diags


def _natural_loops(g: nx.DiGraph, entry: str) -> dict[str, set[str]]:
    idom = nx.immediate_dominators(g, entry)

    def dominates(a: str, b: str) -> bool:
        while True:
            if a == b:
                return True
            if idom[b] == b:
                return False
            b = idom[b]

    loops: dict[str, set[str]] = {}
    for t, h in g.edges:
        if not dominates(h, t):
            continue
        body = {h}
        stack = [t]
        while stack:
            n = stack.pop()
            if n in body:
                continue
            body.add(n)
            stack.extend(g.predecessors(n))
        loops.setdefault(h, set()).update(body)
    return loops


def build_cfg(function: Function) -> Cfg:
    g, reach, diags = _block_graph(function)
    blocks = [b for b in function.blocks if b.label in reach]
    cfg = Cfg(function.name, [], set(), blocks[0].instructions[0].id, diagnostics=diags)
    for b in blocks:
        ids = [i.id for i in b.instructions]
        cfg.nodes.extend(ids)
        cfg.block_first[b.label] = ids[0]
        cfg.block_last[b.label] = ids[-1]
        for i in ids:
            cfg.block_of_instr[i] = b.label
        cfg.edges.update(zip(ids, ids[1:]))
    for b in blocks:
        succ = [s for s in b.successors() if s in reach]
        # keep order, drop duplicate targets (switch cases sharing a label)
        cfg.block_succs[b.label] = list(dict.fromkeys(succ))
        cfg.block_preds.setdefault(b.label, [])
        for s in cfg.block_succs[b.label]:
            cfg.block_preds.setdefault(s, []).append(b.label)
            cfg.edges.add((cfg.block_last[b.label], cfg.block_first[s]))
        term = b.terminator
        if term is not None and term.opcode in ("ret", "unreachable"):
            cfg.edges.add((term.id, VIRTUAL_EXIT))
            if term.opcode == "ret":
                cfg.exit_blocks.append(b.label)

    # termination-sensitive edges for loops
    term_of = {b.label: b.terminator for b in blocks}
    for header, body in _natural_loops(g, function.entry).items():
        exiting = [n for n in body if any(s not in body for s in g.successors(n))]
        sources = [n for n in exiting if term_of[n] is not None and term_of[n].is_cond_branch]
        if not exiting:
            sources = [header]
        cfg.synthetic.update(sources)
    # anything still unable to reach the exit (irreducible cycles) gets an edge too
    while True:
        rg = nx.DiGraph()
        rg.add_nodes_from(cfg.block_succs)
        for a, ss in cfg.block_succs.items():
            rg.add_edges_from((a, s) for s in ss)
        sinks = set(cfg.exit_blocks) | cfg.synthetic | {
            b.label for b in blocks if term_of[b.label] is not None
            and term_of[b.label].opcode == "unreachable"}
        can_exit = set(sinks)
        for s in sinks:
            can_exit |= nx.ancestors(rg, s)
        stuck = [b.label for b in blocks if b.label not in can_exit]
        if not stuck:
            break
        cfg.synthetic.add(stuck[0])
    for label in cfg.synthetic:
        cfg.edges.add((cfg.block_last[label], VIRTUAL_EXIT))

    cfg.block_order = _block_rpo(cfg, function.entry)
    return cfg


def _block_rpo(cfg: Cfg, entry: str) -> list[str]:
    seen: set[str] = set()
    post: list[str] = []
    stack: list[tuple[str, int]] = [(entry, 0)]
    seen.add(entry)
    while stack:
        node, idx = stack[-1]
        succs = cfg.block_succs.get(node, [])
        if idx < len(succs):
            stack[-1] = (node, idx + 1)
            s = succs[idx]
            if s not in seen:
                seen.add(s)
                stack.append((s, 0))
        else:
            stack.pop()
            post.append(node)
    return post[::-1]


def _exit_graph(cfg: Cfg) -> nx.DiGraph:
    """Block graph augmented with the virtual exit."""
    g = nx.DiGraph()
    g.add_node(_VEXIT_BLOCK)
    for a, ss in cfg.block_succs.items():
        g.add_node(a)
        g.add_edges_from((a, s) for s in ss)
    for label in cfg.exit_blocks:
        g.add_edge(label, _VEXIT_BLOCK)
    for label in cfg.synthetic:
        g.add_edge(label, _VEXIT_BLOCK)
    for label, last in cfg.block_last.items():
        if (last, VIRTUAL_EXIT) in cfg.edges:
            g.add_edge(label, _VEXIT_BLOCK)
    return g


def block_postdominators(cfg: Cfg) -> dict[str, str]:
    g = _exit_graph(cfg)
    ipdom = nx.immediate_dominators(g.reverse(copy=False), _VEXIT_BLOCK)
    return {b: ipdom[b] for b in cfg.block_succs}


def postdominators(cfg: Cfg) -> dict[int, int]:
    """Immediate postdominator of every instruction (virtual exit is 0)."""
    bpd = block_postdominators(cfg)
    out: dict[int, int] = {}
    for label in cfg.block_order:
        first, last = cfg.block_first[label], cfg.block_last[label]
        ids = [n for n in range(first, last + 1)]
        for a, b in zip(ids, ids[1:]):
            out[a] = b
        target = bpd[label]
        out[last] = VIRTUAL_EXIT if target == _VEXIT_BLOCK else cfg.block_first[target]
    return out


def control_deps(cfg: Cfg, function: Function) -> ControlDeps:
    bpd = block_postdominators(cfg)
    g = _exit_graph(cfg)
    block_cd: dict[str, set[int]] = {b: set() for b in cfg.block_succs}
    for a in cfg.block_succs:
        term = function.block_of[a].terminator
        if term is None or not term.is_cond_branch:
            continue
        stop = bpd[a]
        for s in g.successors(a):
            runner = s
            while runner != _VEXIT_BLOCK and runner != stop:
                block_cd[runner].add(term.id)
                runner = bpd[runner]
    cd: dict[int, frozenset[int]] = {}
    for label, deps in block_cd.items():
        frozen = frozenset(deps)
        for i in range(cfg.block_first[label], cfg.block_last[label] + 1):
            cd[i] = frozen
    infl: dict[int, set[int]] = {}
    for i, deps in cd.items():
        for j in deps:
            infl.setdefault(j, set()).add(i)
    on_entry: set[int] = set()
    runner = cfg.block_order[0]
    while runner != _VEXIT_BLOCK:
        on_entry.update(range(cfg.block_first[runner], cfg.block_last[runner] + 1))
        runner = bpd[runner]
    return ControlDeps(cd, {j: frozenset(v) for j, v in infl.items()}, frozenset(on_entry))


def reverse_postorder(cfg: Cfg) -> list[int]:
    out: list[int] = []
    for label in cfg.block_order:
        out.extend(range(cfg.block_first[label], cfg.block_last[label] + 1))
    return out
