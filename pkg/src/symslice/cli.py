"""Command-line front end.

Exit codes: 0 success, 1 analysis or input error (and, for ``compare``,
any disagreement), 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .callgraph import UnknownCallee, build_callgraph
from .cfg import build_cfg
from .gen import GenConfig, generate_loops_text, generate_text
from .ir_model import EffectsError, Module, load_effects, validate_module
from .ir_parser import ParseError, parse_module
from .oracle import bruteforce_closure, build_pdg, build_sdg, sdg_slice, weiser_slice
from .report import emit_idt, export_dot, render_slice, slice_stats
from .slicer import (
    ModeError, Sym, UnknownVariable, auto_criteria, backward_slice, concretize,
    forward_slice, gmod_gref, in_params, inter_slice, intra_slice, out_params,
    sorted_elems, summ,
)


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    criterion: str | None = None
    direction: str = "backward"
    mode: str = "fast"
    oracle: str = "sdg"
    seed: int | None = None
    max_procs: int = 5
    max_instrs: int = 200
    loops: int = 0
    format: str | None = None
    listing: str | None = None
    graph: str = "callgraph"
    function: str | None = None
    effects: str | None = None
    out: str | None = None


# ---------------------------------------------------------------------------
# helpers

def _load(path: str) -> Module:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    module = parse_module(text, name=Path(path).stem)
    errors = validate_module(module)
    if errors:
        raise ValueError("; ".join(str(d) for d in errors))
    return module


def _single_input(cfg: CliConfig) -> Module:
    if len(cfg.inputs) != 1:
        raise UsageError(f"{cfg.command} takes exactly one input file")
    return _load(cfg.inputs[0])


def parse_criterion(module: Module, text: str) -> tuple[str, str]:
    """"@f:%x", "@f %x", or a bare "%x" naming a value defined in exactly
    one procedure (a bare global is taken at the end of @main)."""
    text = text.strip()
    if ":" in text:
        function, var = (p.strip() for p in text.split(":", 1))
    elif " " in text:
        function, var = text.split(None, 1)
    else:
        function, var = "", text
    if function and not function.startswith("@"):
        function = "@" + function
    if not var or var[0] not in "%@":
        raise UsageError(f"bad criterion {text!r}: expected FUNC:VAR with VAR like %x or @g")
    if function:
        return function, var
    if var in module.global_names:
        if "@main" not in module.function_map:
            raise UsageError(f"criterion {text!r} needs a procedure: module has no @main")
        return "@main", var
    owners = [f.name for f in module.functions
              if var in f.formals or any(i.result == var for i in f.instructions())]
    if len(owners) != 1:
        where = "no procedure" if not owners else "procedures " + ", ".join(owners)
        raise UsageError(f"criterion {text!r} is ambiguous: {var} is defined in {where}")
    return owners[0], var


def _emit(cfg: CliConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _ids(s) -> str:
    return " ".join(str(i) for i in sorted(s))


# ---------------------------------------------------------------------------
# commands

def cmd_slice(cfg: CliConfig) -> int:
    if not cfg.criterion:
        raise UsageError("slice needs --criterion")
    module = _single_input(cfg)
    crit = parse_criterion(module, cfg.criterion)
    effects = load_effects(cfg.effects)
    if cfg.direction == "forward":
        result = inter_slice(module, "full", effects)
        s = forward_slice(result, crit)
    else:
        result = inter_slice(module, cfg.mode, effects)
        s = backward_slice(result, crit)
    fmt = cfg.format or "text"
    if fmt == "json":
        text = json.dumps({"criterion": list(crit), "direction": cfg.direction,
                           "slice": sorted(s)}, indent=2) + "\n"
    elif fmt == "text":
        text = _ids(s) + "\n"
        if cfg.listing:
            text += "\n" + render_slice(module, s, cfg.listing)
    else:
        raise UsageError(f"slice does not support --format {fmt}")
    _emit(cfg, text)
    return 0


def cmd_idt(cfg: CliConfig) -> int:
    module = _single_input(cfg)
    result = inter_slice(module, "full", load_effects(cfg.effects))
    fmt = cfg.format or "csv"
    if fmt not in ("csv", "text"):
        raise UsageError(f"idt does not support --format {fmt}")
    _emit(cfg, emit_idt(result, "csv" if fmt == "csv" else "pretty"))
    return 0


class _Interner:
    """Negative ids for symbolic parameters, in order of first use."""

    def __init__(self):
        self.ids: dict[Sym, int] = {}

    def __call__(self, e) -> int:
        if not isinstance(e, Sym):
            return e
        if e not in self.ids:
            self.ids[e] = -(len(self.ids) + 1)
        return self.ids[e]

    def legend(self) -> list[tuple[int, str, str]]:
        return [(i, repr(s), s.name) for s, i in self.ids.items()]


def summaries_data(result) -> dict:
    """Per-procedure tables with symbols as negative interned ids."""
    intern = _Interner()
    procs = {}
    for f in result.module.functions:
        s = result.summaries[f.name]
        gmod, gref = gmod_gref(s)
        procs[f.name] = {
            "formals": list(s.formals),
            "globals": sorted(s.globals),
            "out": sorted(out_params(s)),
            "in": sorted(in_params(s)),
            "gmod": sorted(gmod),
            "gref": sorted(gref),
            "T": {x: [intern(e) for e in sorted_elems(t)] for x, t in sorted(s.T.items())},
            "summ": {x: sorted(summ(s, x)) for x in s.interface},
        }
    return {"procedures": procs,
            "legend": [{"id": i, "symbol": r, "name": n} for i, r, n in intern.legend()]}


def _summaries_text(data: dict) -> str:
    lines = []
    for name, p in data["procedures"].items():
        lines.append(f"procedure {name}")
        lines.append(f"  formals: {' '.join(p['formals'])}")
        lines.append(f"  globals: {' '.join(p['globals'])}")
        lines.append(f"  OUT: {' '.join(p['out'])}")
        lines.append(f"  IN: {' '.join(p['in'])}")
        lines.append(f"  GMOD: {' '.join(p['gmod'])}")
        lines.append(f"  GREF: {' '.join(p['gref'])}")
        for x, t in p["T"].items():
            lines.append(f"  T({x}) = {{{', '.join(str(e) for e in t)}}}")
        for x, s in p["summ"].items():
            lines.append(f"  SUMM({x}) = {{{', '.join(s)}}}")
        lines.append("")
    lines.append("legend")
    for e in data["legend"]:
        lines.append(f"  {e['id']} {e['symbol']} {e['name']}")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def cmd_summaries(cfg: CliConfig) -> int:
    module = _single_input(cfg)
    result = inter_slice(module, cfg.mode, load_effects(cfg.effects))
    data = summaries_data(result)
    fmt = cfg.format or "text"
    if fmt == "json":
        _emit(cfg, json.dumps(data, indent=2) + "\n")
    elif fmt == "text":
        _emit(cfg, _summaries_text(data))
    else:
        raise UsageError(f"summaries does not support --format {fmt}")
    return 0


def compare_module(module: Module, oracle: str, effects=None) -> list[tuple[str, str, list, list]]:
    """Rows (label, verdict, only in SymPas, only in oracle) for every
    automatic criterion, or every instruction row for pdg-closure."""
    rows = []
    if oracle == "pdg-closure":
        for f in module.functions:
            if any(i.is_call and i.callee in module.function_map for i in f.instructions()):
                rows.append((f.name, "skipped (calls)", [], []))
                continue
            L, _ = intra_slice(f, "full", module, effects)
            pdg = build_pdg(f, effects=effects)
            for v, row in L.items():
                mine, theirs = concretize(row), bruteforce_closure(pdg, v)
                rows.append((f"{f.name}:{v}", _verdict(mine, theirs),
                             sorted(mine - theirs), sorted(theirs - mine)))
        return rows
    result = inter_slice(module, "fast", effects)
    sdg = build_sdg(module, effects)
    for crit in auto_criteria(module):
        mine = backward_slice(result, crit)
        theirs = sdg_slice(sdg, *crit) if oracle == "sdg" else weiser_slice(module, crit, sdg)
        rows.append((":".join(crit), _verdict(mine, theirs),
                     sorted(mine - theirs), sorted(theirs - mine)))
    return rows


def _verdict(mine, theirs) -> str:
    if mine == theirs:
        return "equal"
    if mine <= theirs:
        return "superset"  # the oracle's slice contains SymPas's
    return "diff"


def cmd_compare(cfg: CliConfig) -> int:
    if not cfg.inputs:
        raise UsageError("compare needs at least one input file")
    effects = load_effects(cfg.effects)
    lines, ok = [], True
    for path in cfg.inputs:
        module = _load(path)
        for label, verdict, mine, theirs in compare_module(module, cfg.oracle, effects):
            line = f"{path} {label} {verdict}"
            if mine:
                line += f" sympas-only {{{_ids(mine)}}}"
            if theirs:
                line += f" {cfg.oracle}-only {{{_ids(theirs)}}}"
            lines.append(line)
            if verdict == "diff" or (verdict == "superset" and cfg.oracle != "weiser"):
                ok = False
    lines.append("all equal" if ok and cfg.oracle != "weiser" else
                 "all contained" if ok else "mismatches found")
    _emit(cfg, "\n".join(lines) + "\n")
    return 0 if ok else 1


def cmd_gen(cfg: CliConfig) -> int:
    if cfg.seed is None:
        raise UsageError("gen needs --seed")
    if cfg.loops:
        text = generate_loops_text(cfg.seed, cfg.loops)
    else:
        text = generate_text(cfg.seed, GenConfig(max_procs=cfg.max_procs,
                                                 max_instrs=cfg.max_instrs))
    _emit(cfg, text)
    return 0


def cmd_stats(cfg: CliConfig) -> int:
    if not cfg.inputs:
        raise UsageError("stats needs at least one input file")
    effects = load_effects(cfg.effects)
    fmt = cfg.format or "text"
    if fmt not in ("text", "csv"):
        raise UsageError(f"stats does not support --format {fmt}")
    chunks = []
    for path in cfg.inputs:
        module = _load(path)
        result = inter_slice(module, cfg.mode, effects)
        rep = slice_stats(module, {c: backward_slice(result, c) for c in auto_criteria(module)})
        body = rep.to_text() if fmt == "text" else rep.to_csv()
        chunks.append(f"# {path}\n{body}" if len(cfg.inputs) > 1 else body)
    _emit(cfg, "\n".join(chunks))
    return 0


def cmd_dot(cfg: CliConfig) -> int:
    module = _single_input(cfg)
    if cfg.graph == "callgraph":
        graph = build_callgraph(module)
    elif cfg.graph == "sdg":
        graph = build_sdg(module, load_effects(cfg.effects))
    else:
        name = cfg.function or module.functions[0].name
        if name not in module.function_map:
            raise UsageError(f"unknown procedure {name}")
        f = module.function(name)
        graph = build_cfg(f) if cfg.graph == "cfg" else build_pdg(
            f, effects=load_effects(cfg.effects))
    _emit(cfg, export_dot(graph))
    return 0


COMMANDS = {"slice": cmd_slice, "idt": cmd_idt, "summaries": cmd_summaries,
            "compare": cmd_compare, "gen": cmd_gen, "stats": cmd_stats, "dot": cmd_dot}


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symslice", description="Symbolic slicing of mini-IR modules.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, inputs="+"):
        if inputs:
            sp.add_argument("inputs", nargs=inputs, metavar="FILE")
        sp.add_argument("--effects", help="JSON file describing external functions")
        sp.add_argument("--out", help="write output here instead of standard output")
        return sp

    sp = common(sub.add_parser("slice", help="slice on a criterion"), 1)
    sp.add_argument("--criterion", required=True, help='"@f:%%x", "@f %%x" or "%%x"')
    sp.add_argument("--direction", choices=["backward", "forward"], default="backward")
    sp.add_argument("--mode", choices=["fast", "full"], default="fast")
    sp.add_argument("--format", choices=["text", "json"])
    sp.add_argument("--listing", choices=["keep", "strike"], help="append an annotated listing")

    sp = common(sub.add_parser("idt", help="dump the instruction dependency table"), 1)
    sp.add_argument("--format", choices=["csv", "text"])

    sp = common(sub.add_parser("summaries", help="dump procedure summaries"), 1)
    sp.add_argument("--mode", choices=["fast", "full"], default="fast")
    sp.add_argument("--format", choices=["text", "json"])

    sp = common(sub.add_parser("compare", help="compare with a reference slicer"))
    sp.add_argument("--oracle", choices=["sdg", "weiser", "pdg-closure"], default="sdg")

    sp = common(sub.add_parser("gen", help="generate a random module"), None)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--max-procs", type=int, default=5)
    sp.add_argument("--max-instrs", type=int, default=200)
    sp.add_argument("--loops", type=int, default=0,
                    help="emit one procedure with this many while loops instead")

    sp = common(sub.add_parser("stats", help="slice-size statistics over automatic criteria"))
    sp.add_argument("--mode", choices=["fast", "full"], default="fast")
    sp.add_argument("--format", choices=["text", "csv"])

    sp = common(sub.add_parser("dot", help="export a graph in DOT"), 1)
    sp.add_argument("--graph", choices=["callgraph", "cfg", "pdg", "sdg"], default="callgraph")
    sp.add_argument("--function", help="procedure for cfg and pdg graphs")
    return p


def _config(ns: argparse.Namespace) -> CliConfig:
    cfg = CliConfig(ns.command)
    for name, value in vars(ns).items():
        if name != "command" and hasattr(cfg, name):
            setattr(cfg, name, value)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = _config(ns)
    try:
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"symslice: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"symslice: parse error at {exc}", file=sys.stderr)
        return 1
    except (UnknownVariable, UnknownCallee, ModeError, EffectsError, ValueError) as exc:
        print(f"symslice: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
