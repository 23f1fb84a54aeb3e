from __future__ import annotations

import re
import statistics
from pathlib import Path

import pytest

from symslice.callgraph import build_callgraph
from symslice.cfg import build_cfg
from symslice.gen import generate_module
from symslice.ir_parser import parse_module
from symslice.oracle import build_pdg, build_sdg, sdg_backward_slice
from symslice.report import emit_idt, export_dot, idt_matrix, render_slice, slice_stats
from symslice.slicer import ModeError, auto_criteria, backward_slice, inter_slice

GOLDEN = Path(__file__).parent / "golden" / "fig8_idt.csv"


def test_idt_cells(fig8):
    m = idt_matrix(inter_slice(fig8, "full"))
    assert m.n == 32
    assert not m.cell(19, 21)
    assert all(m.cell(i, i) for i in range(1, 33))
    assert m.cell(13, 12)


def test_idt_rows_are_instruction_slices(fig8):
    """Each row is the two-phase SDG slice from that instruction."""
    r, sdg = inter_slice(fig8, "full"), build_sdg(fig8)
    m = idt_matrix(r)
    for i in range(1, 33):
        row = {c for c in range(1, 33) if m.cell(i, c)}
        assert row == sdg_backward_slice(sdg, i), i


def test_idt_csv_golden(fig8):
    text = emit_idt(inter_slice(fig8, "full"))
    assert text == GOLDEN.read_text(encoding="utf-8")
    assert GOLDEN.read_bytes().count(b"\r") == 0
    lines = text.splitlines()
    assert lines[0] == "i," + ",".join(str(c) for c in range(1, 33))
    assert len(lines) == 33
    assert lines[19].split(",")[21] == "0"


def test_idt_deterministic(fig8):
    assert emit_idt(inter_slice(fig8, "full")) == emit_idt(inter_slice(fig8, "full"))


def test_idt_one_instruction():
    m = parse_module("define void @f() {\nentry:\n  ret void\n}\n")
    assert emit_idt(inter_slice(m, "full")) == "i,1\n1,1\n"


def test_idt_needs_full_mode(fig8):
    with pytest.raises(ModeError):
        emit_idt(inter_slice(fig8, "fast"))


def test_idt_pretty(fig8):
    text = emit_idt(inter_slice(fig8, "full"), "pretty")
    assert len(text.splitlines()) == 33


def test_render_strike(fig8):
    z = backward_slice(inter_slice(fig8), ("@inc", "%z"))
    text = render_slice(fig8, z, "strike")
    struck = {int(n) for n in re.findall(r"^; x (\d+)\)", text, re.M)}
    assert {6, 21} <= struck
    assert struck == set(range(1, 33)) - z
    assert "; line" in text


def test_render_full_slice_unmarked(fig8):
    text = render_slice(fig8, range(1, 33), "strike")
    assert "; x" not in text


def test_render_keep_reparses(fig8):
    z = backward_slice(inter_slice(fig8), ("@inc", "%z"))
    assert parse_module(render_slice(fig8, z, "keep")).size == len(z)


def test_render_keep_round_trip_generated():
    for seed in range(10):
        m = generate_module(seed)
        r = inter_slice(m)
        for c in auto_criteria(m)[:3]:
            s = backward_slice(r, c)
            kept = parse_module(render_slice(m, s, "keep")) if s else None
            assert (kept.size if kept else 0) == len(s)


def test_stats_fixture(fig8):
    r = inter_slice(fig8)
    slices = {c: backward_slice(r, c) for c in auto_criteria(fig8)}
    rep = slice_stats(fig8, slices)
    by_label = {label: frac for label, _, frac in rep.rows}
    assert by_label["@main:%n"] == 1 / 32
    assert by_label["@main:%sum"] == 17 / 32
    assert rep.mean == pytest.approx(sum(len(s) for s in slices.values()) / 32 / len(slices))
    assert rep.median == statistics.median(len(s) / 32 for s in slices.values())
    assert rep.max == 17 / 32
    assert "mean 37.50%" in rep.to_text()
    assert rep.to_csv().splitlines()[0] == "criterion,size,n,fraction"


def test_stats_empty_slice(fig8):
    rep = slice_stats(fig8, {("@main", "%x"): frozenset()})
    assert rep.rows[0][2] == 0.0
    assert "0.00%" in rep.to_text()


def _dot_counts(text):
    nodes = len(re.findall(r'^  "[^"]*";$', text, re.M))
    edges = len(re.findall(r"^  .* -> .*;$", text, re.M))
    return nodes, edges


def test_dot_callgraph(fig8):
    text = export_dot(build_callgraph(fig8))
    assert text.startswith("digraph") and text.rstrip().endswith("}")
    assert _dot_counts(text) == (4, 4)
    assert "style=dashed" in text


def test_dot_counts_match(fig8):
    cfg = build_cfg(fig8.function("@main"))
    assert _dot_counts(export_dot(cfg)) == (len(cfg.nodes) + 1, len(cfg.edges))
    pdg = build_pdg(fig8.function("@add"))
    assert _dot_counts(export_dot(pdg)) == (len(pdg.vertices), len(pdg.edges))
    sdg = build_sdg(fig8)
    text = export_dot(sdg)
    assert _dot_counts(text) == (len(sdg.vertices), len(sdg.edges))
    assert "style=bold" in text and "style=dotted" in text and "style=dashed" in text


def test_dot_empty_cfg():
    from symslice.cfg import Cfg
    text = export_dot(Cfg("@f", [], set(), 0))
    assert _dot_counts(text) == (0, 0)
    assert text == 'digraph "cfg @f" {\n}\n'
