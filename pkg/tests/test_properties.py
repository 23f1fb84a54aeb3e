from __future__ import annotations

from conftest import corpus_names, corpus_text
from symslice.gen import GenConfig, generate_module
from symslice.ir_parser import parse_module
from symslice.oracle import bruteforce_closure, build_pdg
from symslice.slicer import (
    Sym, concretize, gmod_gref, inter_slice, intra_slice, out_params,
)


def _modules(count=40):
    for name in corpus_names():
        yield parse_module(corpus_text(name))
    for seed in range(count):
        yield generate_module(seed, GenConfig(max_procs=6, max_instrs=200))


def test_symbolic_hygiene():
    for m in _modules():
        for name, s in inter_slice(m).summaries.items():
            allowed = {s.symbol(x) for x in s.formals} | {Sym(g) for g in s.globals}
            for t in list(s.T.values()) + list(s.context.values()):
                assert {e for e in t if isinstance(e, Sym)} <= allowed, name


def test_gmod_is_out():
    for m in _modules():
        for s in inter_slice(m).summaries.values():
            gmod, gref = gmod_gref(s)
            assert gmod == out_params(s)
            assert gmod <= set(s.interface) and gref <= set(s.interface)


def test_empty_procedure_mod_ref():
    m = parse_module("define void @f() {\nentry:\n  ret void\n}\n")
    assert gmod_gref(inter_slice(m).summaries["@f"]) == (set(), set())


def test_intra_slices_equal_pdg_slices():
    """End-of-procedure slices of call-free procedures equal PDG closure
    from the definitions reaching the end."""
    for seed in range(60):
        m = generate_module(seed, GenConfig(max_instrs=80), single=True)
        f = m.functions[0]
        L, T = intra_slice(f, "full", m)
        pdg = build_pdg(f)
        r = inter_slice(m, "full")
        for x in f.locals:
            end = r.final(f.name, x)
            # every instruction in the slice reaches through the PDG to itself
            assert end == concretize(T.T[x])
            for v in end:
                assert bruteforce_closure(pdg, v) <= end


def test_full_rows_grow_into_slices():
    """A stored row of a store instruction is contained in the final slice
    of the object it writes when that store reaches the end."""
    for seed in range(20):
        m = generate_module(seed, GenConfig(max_instrs=80), single=True)
        f = m.functions[0]
        L, T = intra_slice(f, "full", m)
        last = {}
        for ins in f.instructions():
            if ins.opcode == "store" and ins.operands[1].is_name:
                last[f.memory_object(ins.operands[1].value)] = ins.id
        for obj, i in last.items():
            if obj in T.T and i in concretize(T.T[obj]):
                assert concretize(L[i]) <= concretize(T.T[obj])
