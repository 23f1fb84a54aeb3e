from __future__ import annotations

import re

import networkx as nx
import pytest

from conftest import corpus_names, corpus_text
from symslice.callgraph import (
    UnknownCallee, build_callgraph, is_recursive, root_components, scc_order,
)
from symslice.gen import generate_module
from symslice.ir_parser import parse_module


def test_fig8_edges(fig8):
    cg = build_callgraph(fig8)
    assert sorted(cg.edges, key=lambda e: e[2]) == [
        ("@main", "@A", 13), ("@A", "@add", 21), ("@A", "@inc", 22), ("@inc", "@add", 31)]
    assert cg.externals == {"@printf", "@scanf"}


def test_fig8_order(fig8):
    assert scc_order(build_callgraph(fig8)) == [
        frozenset({"@add"}), frozenset({"@inc"}), frozenset({"@A"}), frozenset({"@main"})]


def test_no_calls():
    m = parse_module("define void @f() {\nentry:\n  ret void\n}\n")
    assert build_callgraph(m).edges == []


def test_self_recursion():
    cg = build_callgraph(parse_module(corpus_text("recursion.sir")))
    comps = scc_order(cg)
    assert frozenset({"@fact"}) in comps and is_recursive(cg, frozenset({"@fact"}))
    assert root_components(cg) == [frozenset({"@main"})]


def test_mutual_recursion():
    cg = build_callgraph(parse_module(corpus_text("mutual.sir")))
    comps = scc_order(cg)
    assert comps[0] == frozenset({"@even", "@odd"})
    cycles = list(nx.simple_cycles(cg.graph()))
    assert any(set(c) == {"@even", "@odd"} for c in cycles)


def test_unknown_callee():
    m = parse_module("define void @f() {\nentry:\n  call void @nowhere()\n  ret void\n}\n")
    with pytest.raises(UnknownCallee):
        build_callgraph(m)


@pytest.mark.parametrize("name", corpus_names())
def test_edges_match_textual_recount(name):
    text = corpus_text(name)
    m = parse_module(text)
    defined = {f.name for f in m.functions}
    calls = re.findall(r"call [^@]*(@[\w.]+)\(", text)
    assert sorted(c for c in calls if c in defined) == sorted(b for _, b, _ in
                                                              build_callgraph(m).edges)


@pytest.mark.parametrize("seed", range(30))
def test_order_invariants(seed):
    cg = build_callgraph(generate_module(seed))
    comps = scc_order(cg)
    flat = [n for c in comps for n in c]
    assert sorted(flat) == sorted(cg.nodes)
    index = {n: k for k, c in enumerate(comps) for n in c}
    for a, b, _ in cg.edges:
        if index[a] != index[b]:
            assert index[b] < index[a]
        assert a in cg.nodes and b in cg.nodes
