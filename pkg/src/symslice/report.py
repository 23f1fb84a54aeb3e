"""Text outputs: dependence tables, slice listings, statistics and DOT."""
from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from typing import Iterable

from .callgraph import CallGraph
from .cfg import VIRTUAL_EXIT, Cfg
from .ir_model import Module
from .ir_parser import format_instruction
from .oracle import CALL, PARAM_IN, PARAM_OUT, SUMMARY, Pdg, Sdg
from .slicer import ModeError, SliceResult


# ---------------------------------------------------------------------------
# dependence table

@dataclass
class IdtMatrix:
    n: int
    cells: list[list[bool]]
    analyzed: list[bool]

    def cell(self, r: int, c: int) -> bool:
        return self.cells[r - 1][c - 1]


def idt_matrix(result: SliceResult) -> IdtMatrix:
    """cell(r, c) holds iff c is a concrete member of the final L(r), that
    is, with the symbolic parameters of r's procedure replaced by what
    every caller passes in.  Rows are then backward slices of single
    instructions and columns their forward influence."""
    if result.mode != "full":
        raise ModeError("the dependence table needs a full-table analysis (mode='full')")
    n = result.module.size
    rows = result.expanded or {}
    cells, analyzed = [], []
    for r in range(1, n + 1):
        row = rows.get(r, frozenset())
        cells.append([c in row for c in range(1, n + 1)])
        analyzed.append(r in rows)
    return IdtMatrix(n, cells, analyzed)


def emit_idt(result: SliceResult, format: str = "csv") -> str:
    m = idt_matrix(result)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i"] + [str(c) for c in range(1, m.n + 1)])
        for r in range(1, m.n + 1):
            w.writerow([str(r)] + ["1" if x else "0" for x in m.cells[r - 1]])
        return buf.getvalue()
    if format == "pretty":
        width = len(str(m.n))
        head = " " * (width + 1) + " ".join(str(c).rjust(width) for c in range(1, m.n + 1))
        lines = [head]
        for r in range(1, m.n + 1):
            marks = " ".join(("1" if x else ".").rjust(width) for x in m.cells[r - 1])
            flag = "" if m.analyzed[r - 1] else "  (not analyzed)"
            lines.append(f"{str(r).rjust(width)} {marks}{flag}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {format!r}")


# ---------------------------------------------------------------------------
# slice listing

def render_slice(module: Module, slice: Iterable[int], style: str = "strike") -> str:
    """Numbered listing of the module.  ``strike`` comments out excluded
    instructions with a leading "; x"; ``keep`` drops them, along with
    blocks and procedures left empty."""
    if style not in ("keep", "strike"):
        raise ValueError(f"unknown listing style {style!r}")
    keep = set(slice)
    out: list[str] = []
    for f in module.functions:
        if style == "keep" and not any(i.id in keep for i in f.instructions()):
            continue
        params = ", ".join(f"{p.type} {p.name}" for p in f.params)
        out.append(f"define {f.return_type} {f.name}({params}) {{")
        for b in f.blocks:
            kept = [i for i in b.instructions if i.id in keep]
            if style == "keep" and not kept:
                continue
            out.append(f"{b.label}:")
            for ins in b.instructions:
                text = f"{ins.id}) {format_instruction(ins)}"
                if ins.span is not None:
                    text += f"  ; line {ins.span.line}"
                if ins.id in keep:
                    out.append(f"  {text}")
                elif style == "strike":
                    out.append(f"; x {text}")
        out.append("}")
        out.append("")
    return "\n".join(out).rstrip("\n") + "\n" if out else ""


# ---------------------------------------------------------------------------
# statistics

@dataclass
class StatsReport:
    n: int
    rows: list[tuple[str, int, float]] = field(default_factory=list)  # label, size, fraction

    @property
    def mean(self) -> float:
        return statistics.fmean(r[2] for r in self.rows) if self.rows else 0.0

    @property
    def median(self) -> float:
        return statistics.median(r[2] for r in self.rows) if self.rows else 0.0

    @property
    def max(self) -> float:
        return max((r[2] for r in self.rows), default=0.0)

    def to_text(self) -> str:
        width = max((len(r[0]) for r in self.rows), default=9)
        width = max(width, len("criterion"))
        lines = [f"{'criterion'.ljust(width)}  {'size':>5}  {'fraction':>8}"]
        for label, size, frac in self.rows:
            lines.append(f"{label.ljust(width)}  {size:>5}  {frac * 100:>7.2f}%")
        lines.append(f"instructions {self.n}  criteria {len(self.rows)}")
        lines.append(f"mean {self.mean * 100:.2f}%  median {self.median * 100:.2f}%  "
                     f"max {self.max * 100:.2f}%")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["criterion", "size", "n", "fraction"])
        for label, size, frac in self.rows:
            w.writerow([label, size, self.n, f"{frac:.6f}"])
        w.writerow(["mean", "", self.n, f"{self.mean:.6f}"])
        w.writerow(["median", "", self.n, f"{self.median:.6f}"])
        w.writerow(["max", "", self.n, f"{self.max:.6f}"])
        return buf.getvalue()


def criterion_label(criterion) -> str:
    if isinstance(criterion, tuple):
        return ":".join(criterion)
    return str(criterion)


def slice_stats(module: Module, slices: dict) -> StatsReport:
    n = module.size
    rep = StatsReport(n)
    for crit, s in slices.items():
        size = len(s)
        rep.rows.append((criterion_label(crit), size, size / n if n else 0.0))
    return rep


# ---------------------------------------------------------------------------
# DOT

_EDGE_STYLE = {CALL: "dashed", PARAM_OUT: "dotted", SUMMARY: "bold", PARAM_IN: "dashed"}


def _quote(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _vertex_name(v) -> str:
    if isinstance(v, tuple):
        return ":".join(str(x) for x in v)
    return "exit" if v == VIRTUAL_EXIT else str(v)


def export_dot(graph, name: str | None = None) -> str:
    """DOT digraph for a Cfg, Pdg, Sdg or CallGraph."""
    nodes: list[str] = []
    edges: list[tuple[str, str, str]] = []  # source, target, attributes
    if isinstance(graph, Cfg):
        title = name or f"cfg {graph.function}"
        nodes = [_vertex_name(v) for v in sorted(graph.nodes)]
        if any(b == VIRTUAL_EXIT for _, b in graph.edges):
            nodes.append("exit")
        edges = [(_vertex_name(a), _vertex_name(b), "") for a, b in sorted(graph.edges)]
    elif isinstance(graph, (Pdg, Sdg)):
        title = name or (f"pdg {graph.function}" if isinstance(graph, Pdg) else "sdg")
        nodes = sorted(_vertex_name(v) for v in graph.vertices)
        for a, b, kind in sorted(graph.edges, key=lambda e: (_vertex_name(e[0]),
                                                             _vertex_name(e[1]), e[2])):
            attrs = f"label={_quote(kind)}"
            if kind in _EDGE_STYLE:
                attrs += f", style={_EDGE_STYLE[kind]}"
            edges.append((_vertex_name(a), _vertex_name(b), attrs))
    elif isinstance(graph, CallGraph):
        title = name or "callgraph"
        nodes = list(graph.nodes)
        edges = [(a, b, f"label={_quote(site)}, style=dashed")
                 for a, b, site in sorted(graph.edges, key=lambda e: e[2])]
    else:
        raise TypeError(f"cannot export {type(graph).__name__} as DOT")
    lines = [f"digraph {_quote(title)} {{"]
    lines += [f"  {_quote(n)};" for n in nodes]
    for a, b, attrs in edges:
        tail = f" [{attrs}]" if attrs else ""
        lines.append(f"  {_quote(a)} -> {_quote(b)}{tail};")
    lines.append("}")
    return "\n".join(lines) + "\n"
