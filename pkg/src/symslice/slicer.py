"""Symbolic backward and forward slicing over the mini-IR.

Every instruction i gets a dependence set L(i): the instructions (and
symbolic parameters) that may influence it.  Every named value x gets a
slice S(x) at each program point.  A procedure is analysed once, with its
formals and globals standing for symbols l_x.  The resulting table T_P
(the slice of each value at the procedure's exit) is its summary.  A
caller instantiates T_P at each call site by substituting each symbol
with the slice of the matching actual argument.

Slice tables hold two kinds of entries.  Own entries are keyed by the
procedure's unqualified value names (``%x``, ``@g``) and follow normal
dataflow with strong updates.  Context entries are keyed by qualified
names (``@callee:%x``).  They record the slice of a value in some callee
frame, as seen through the call sites that lead to it, and are only
ever extended.  Keeping them apart stops a recursive call from mixing
the caller's locals with the callee instance's locals of the same name.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .callgraph import CallGraph, build_callgraph, is_recursive, root_components, scc_order
from .cfg import build_cfg, control_deps
from .ir_model import (
    ExternalEffect, Function, Instruction, Module, data_effect, load_effects, operand_reads,
    frame_key, qualify, ref_set, return_key, split_key,
)


class Sym:
    """Symbolic parameter l_x standing for the incoming slice of x."""

    __slots__ = ("name", "_hash")
    _pool: dict[str, "Sym"] = {}

    def __new__(cls, name: str):
        sym = cls._pool.get(name)
        if sym is None:
            sym = object.__new__(cls)
            sym.name = name
            sym._hash = hash(("Sym", name))
            cls._pool[name] = sym
        return sym

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self is other

    def __reduce__(self):
        return (Sym, (self.name,))

    @property
    def local_name(self) -> str:
        return split_key(self.name)[1]

    def __repr__(self) -> str:
        return f"l_{self.local_name}"


SliceSet = frozenset
EMPTY: frozenset = frozenset()


class UnknownVariable(Exception):
    pass


class ModeError(Exception):
    pass


class ArityMismatch(Exception):
    pass


def sym(function: str, name: str) -> Sym:
    return Sym(qualify(function, name))


def elem_key(e) -> tuple:
    return (1, e.name) if isinstance(e, Sym) else (0, e)


def sorted_elems(s: Iterable) -> list:
    return sorted(s, key=elem_key)


def concretize(s: Iterable) -> frozenset[int]:
    return frozenset(e for e in s if type(e) is int)


# ---------------------------------------------------------------------------
# summaries

@dataclass
class ProcSummary:
    """Slice table of a procedure at its exit.

    ``T`` maps the procedure's own names to their symbolic slices;
    ``context`` maps qualified names of values in callee frames.
    """

    proc: str
    formals: tuple[str, ...]
    globals: frozenset[str]
    T: dict[str, frozenset]
    context: dict[str, frozenset] = field(default_factory=dict)

    @property
    def interface(self) -> list[str]:
        return list(self.formals) + sorted(self.globals)

    def symbol(self, x: str) -> Sym:
        return Sym(qualify(self.proc, x))

    def is_out(self, x: str) -> bool:
        t = self.T.get(x)
        return t is not None and t != frozenset({self.symbol(x)})

    def same(self, other: "ProcSummary | None") -> bool:
        return other is not None and self.T == other.T and self.context == other.context


def out_params(summary: ProcSummary) -> set[str]:
    return {x for x in summary.interface if summary.is_out(x)}


def in_params(summary: ProcSummary) -> set[str]:
    return {x for x in summary.interface if not summary.is_out(x)}


def summ(summary: ProcSummary, x: str) -> set[str]:
    """Formals and globals whose incoming values reach x at the exit."""
    t = summary.T.get(x, frozenset({summary.symbol(x)}))
    return {e.local_name for e in t if isinstance(e, Sym)}


def gmod_gref(summary: ProcSummary) -> tuple[set[str], set[str]]:
    gref: set[str] = set()
    for table in (summary.T, summary.context):
        for t in table.values():
            gref.update(e.local_name for e in t if isinstance(e, Sym))
    return out_params(summary), gref


def seed_summary(function: Function, globals_: frozenset[str]) -> ProcSummary:
    table = {x: frozenset({sym(function.name, x)}) for x in function.formals}
    table.update({g: frozenset({Sym(g)}) for g in globals_})
    return ProcSummary(function.name, function.formals, globals_, table)


# ---------------------------------------------------------------------------
# single-step operations

def init_slice_table(function: Function, globals_: Iterable[str],
                     existing: dict[str, frozenset] | None = None) -> dict[str, frozenset]:
    table = dict(existing or {})
    for x in list(function.formals) + sorted(globals_):
        if not table.get(x):
            table[x] = frozenset({sym(function.name, x)})
    return table


def instr_deps(ins: Instruction, L: dict[int, frozenset], S: dict[str, frozenset],
               cd: dict[int, frozenset[int]], reads: Iterable[str] | None = None) -> frozenset:
    """l' for one instruction; ``reads`` defaults to its syntactic REF set."""
    acc = set(L.get(ins.id) or (ins.id,))
    for j in cd.get(ins.id, ()):
        acc.update(L.get(j) or (j,))
    for x in (ref_set(ins) if reads is None else reads):
        acc.update(S.get(x, EMPTY))
    return frozenset(acc)


def update_def_slices(defs: Iterable[str], lprime: frozenset, S: dict[str, frozenset],
                      multi: bool = False) -> dict[str, frozenset]:
    for x in defs:
        S[x] = (S.get(x, EMPTY) | lprime) if multi else lprime
    return S


def spec_at_call(site: Instruction, caller: Function, callee: ProcSummary,
                 S: dict[str, frozenset]) -> dict[Sym, frozenset]:
    if len(site.operands) < len(callee.formals):
        raise ArityMismatch(f"call at {site.id} passes {len(site.operands)} arguments to "
                            f"{callee.proc}, which takes {len(callee.formals)}")
    spec: dict[Sym, frozenset] = {}
    for y, actual in zip(callee.formals, site.operands):
        acc: set = set()
        for z in operand_reads(caller, actual):
            acc.update(S.get(z, EMPTY))
        spec[callee.symbol(y)] = frozenset(acc)
    for g in callee.globals:
        spec[Sym(g)] = S.get(g, EMPTY)
    return spec


def _substitute(s: frozenset, spec: dict[Sym, frozenset]) -> frozenset:
    if not any(isinstance(e, Sym) for e in s):
        return s
    out = set()
    for e in s:
        if isinstance(e, Sym) and e in spec:
            out.update(spec[e])
        else:
            out.add(e)
    return frozenset(out)


def instantiate_summary(callee: ProcSummary, spec: dict[Sym, frozenset],
                        lsite: frozenset) -> dict[str, frozenset]:
    """Callee exit slices as seen at one call site, keyed by qualified name.

    Input-only formals contribute just the call site's own dependences
    and input-only globals nothing.  Every other entry has the callee's
    symbols replaced by the caller-side slices and gains the call site's
    dependences.  Globals also get an ``@callee:@g`` entry holding their
    value at the callee's end.
    """
    tprime: dict[str, frozenset] = {}
    formals = set(callee.formals)
    for x, t in callee.T.items():
        key = qualify(callee.proc, x)
        if x in callee.globals:
            # the global in the caller, plus its value at the callee's end
            if callee.is_out(x):
                tprime[key] = _substitute(t, spec) | lsite
            tprime[frame_key(callee.proc, x)] = _substitute(t, spec) | lsite
            continue
        if x in formals and not callee.is_out(x):
            tprime[key] = lsite
            continue
        tprime[key] = _substitute(t, spec) | lsite
    return tprime


def instantiate_context(callee: ProcSummary, spec: dict[Sym, frozenset],
                        lsite: frozenset) -> dict[str, frozenset]:
    """The callee's context entries (values in deeper frames) at one call site."""
    return {key: _substitute(t, spec) | lsite for key, t in callee.context.items()}


def apply_call_effects(site: Instruction, caller: Function, callee: ProcSummary,
                       tprime: dict[str, frozenset], deeper: dict[str, frozenset],
                       lsite: frozenset, own: dict[str, frozenset],
                       context: dict[str, frozenset]) -> None:
    """Write instantiated callee slices back into the caller's tables.

    ``tprime`` holds the callee frame's own values and ``deeper`` those of
    frames below it; both only ever extend the caller's context entries.
    """
    for g in callee.globals:
        if callee.is_out(g):
            own[g] = tprime[g]
    for table in (tprime, deeper):
        for key, t in table.items():
            if key in callee.globals:
                continue
            prev = context.get(key)
            context[key] = t if prev is None else prev | t
    for y, actual in zip(callee.formals, site.operands):
        if callee.is_out(y) and actual.is_name:
            own[caller.memory_object(actual.value)] = tprime[qualify(callee.proc, y)]
    if site.result:
        own[site.result] = tprime.get(return_key(callee.proc), lsite)


# ---------------------------------------------------------------------------
# bit encoding

class _Bits:
    """Slice sets as Python ints: instruction i is bit i, symbols follow."""

    def __init__(self, n_instr: int):
        self.base = n_instr + 1
        self.concrete_mask = (1 << self.base) - 1
        self.index: dict[Sym, int] = {}
        self.syms: list[Sym] = []

    def sym(self, s: Sym) -> int:
        k = self.index.get(s)
        if k is None:
            k = self.index[s] = self.base + len(self.syms)
            self.syms.append(s)
        return 1 << k

    def encode(self, elems: Iterable) -> int:
        b = 0
        for e in elems:
            b |= self.sym(e) if isinstance(e, Sym) else 1 << e
        return b

    def decode(self, b: int) -> frozenset:
        out = []
        digits = bin(b)[:1:-1]
        k = digits.find("1")
        while k >= 0:
            out.append(k if k < self.base else self.syms[k - self.base])
            k = digits.find("1", k + 1)
        return frozenset(out)

    def decode_ints(self, b: int) -> frozenset[int]:
        return self.decode(b & self.concrete_mask)


# ---------------------------------------------------------------------------
# results

@dataclass
class CallInstantiation:
    site: int
    callee: str
    spec: dict[Sym, frozenset]
    tprime: dict[str, frozenset]
    deeper: dict[str, frozenset] = field(default_factory=dict)


@dataclass
class _Summ:
    proc: str
    formals: tuple[str, ...]
    globals: frozenset[str]
    symbits: dict[str, int]
    T: dict[str, int]
    ctx: dict[str, int]

    def is_out(self, x: str) -> bool:
        t = self.T.get(x)
        return t is not None and t != self.symbits[x]

    def outs(self) -> frozenset[str]:
        return frozenset(x for x in self.symbits if self.is_out(x))

    def same(self, other: "_Summ | None") -> bool:
        return other is not None and self.T == other.T and self.ctx == other.ctx


class SliceResult:
    """Outcome of an analysis; tables are decoded on first access."""

    def __init__(self, module: Module, mode: str, engine: "_Engine", callers: "_Callers",
                 final: dict[str, int] | None, callgraph: CallGraph, roots: list[str],
                 expanded: dict[int, int] | None):
        self.module = module
        self.mode = mode
        self.callgraph = callgraph
        self.roots = roots
        self.cfgs = engine.cfgs
        self.cds = engine.cds
        self.globals_of = engine.globals_of
        self._bits = engine.bits
        self._engine = engine
        self._callers = callers
        self._final = final
        self._expanded = expanded
        self._cache: dict[str, object] = {}

    def _memo(self, name: str, make):
        if name not in self._cache:
            self._cache[name] = make()
        return self._cache[name]

    @property
    def L(self) -> dict[int, frozenset]:
        """Stored dependence rows (symbolic, per procedure)."""
        return self._memo("L", lambda: {i: self._bits.decode(b)
                                        for i, b in sorted(self._engine.L.items())})

    def _value(self, key: str) -> int:
        if self._final is not None:
            return self._final.get(key, 0)
        return self._callers.value(key)

    @property
    def S(self) -> dict[str, frozenset[int]]:
        """Final (concrete) slice of every value, keyed by frame key."""
        def make():
            keys = self._final if self._final is not None else self._callers.keys()
            return {k: self._bits.decode_ints(self._value(k)) for k in sorted(keys)}
        return self._memo("S", make)

    @property
    def summaries(self) -> dict[str, ProcSummary]:
        def make():
            d = self._bits.decode
            return {p: ProcSummary(s.proc, s.formals, s.globals,
                                   {x: d(t) for x, t in s.T.items()},
                                   {k: d(t) for k, t in s.ctx.items()})
                    for p, s in self._engine.summaries.items()}
        return self._memo("summaries", make)

    @property
    def instantiations(self) -> dict[int, CallInstantiation]:
        def make():
            d = self._bits.decode
            out = {}
            for site, (callee, spec, tprime, deeper) in sorted(self._engine.records.items()):
                syms = self._engine.summaries[callee].symbits
                by_bit = {b: Sym(qualify(callee, x)) for x, b in syms.items()}
                out[site] = CallInstantiation(
                    site, callee, {by_bit[b]: d(v) for b, v in spec.items()},
                    {k: d(v) for k, v in tprime.items()}, {k: d(v) for k, v in deeper.items()})
            return out
        return self._memo("instantiations", make)

    @property
    def expanded(self) -> dict[int, frozenset[int]] | None:
        if self._expanded is None:
            return None
        return self._memo("expanded", lambda: {i: self._bits.decode_ints(b)
                                               for i, b in sorted(self._expanded.items())})

    def final(self, function: str, var: str) -> frozenset[int]:
        return self._bits.decode_ints(self._value(frame_key(function, var)))

    def row(self, i: int) -> frozenset[int]:
        """Concrete dependence row of an instruction across all contexts."""
        if self._expanded is None:
            raise ModeError("dependence rows need a full-table analysis (mode='full')")
        return self._bits.decode_ints(self._expanded[i])


STORED_KINDS = frozenset({"store", "call", "switch"})


def _stores_row(ins: Instruction, mode: str) -> bool:
    return mode == "full" or ins.is_cond_branch or ins.opcode in STORED_KINDS


# ---------------------------------------------------------------------------
# per-procedure fixpoint

def _merge(tables: list[dict[str, int]]) -> dict[str, int]:
    if not tables:
        return {}
    out = dict(tables[0])
    for t in tables[1:]:
        for k, v in t.items():
            out[k] = out.get(k, 0) | v
    return out


class _Engine:
    def __init__(self, module: Module, mode: str, effects: dict[str, ExternalEffect],
                 contexts: bool = False):
        if mode not in ("fast", "full"):
            raise ValueError(f"unknown mode {mode!r}")
        self.module = module
        self.mode = mode
        self.effects = effects
        self.contexts = contexts
        self.bits = _Bits(module.size)
        self.L: dict[int, int] = {}
        self.cfgs = {f.name: build_cfg(f) for f in module.functions}
        self.cds = {f.name: control_deps(self.cfgs[f.name], f) for f in module.functions}
        self.summaries: dict[str, _Summ] = {}
        self.records: dict[int, tuple] = {}
        self.globals_of: dict[str, frozenset[str]] = {}
        self._plans: dict[str, list] = {}

    def seed(self, name: str) -> _Summ:
        f = self.module.function(name)
        globals_ = self.globals_of.get(name, frozenset())
        symbits = {x: self.bits.sym(sym(name, x)) for x in list(f.formals) + sorted(globals_)}
        return _Summ(name, f.formals, globals_, symbits, dict(symbits), {})

    def plan(self, f: Function) -> list:
        """Per-block instruction steps, with data effects resolved once."""
        if f.name in self._plans:
            return self._plans[f.name]
        cd = self.cds[f.name].cd
        steps = {}
        for b in f.blocks:
            out = []
            for ins in b.instructions:
                deps = tuple(sorted(cd.get(ins.id, ())))
                store = _stores_row(ins, self.mode)
                if ins.is_call and ins.callee in self.module.function_map:
                    out.append((ins, deps, store, None))
                else:
                    out.append((ins, deps, store, data_effect(f, ins, self.effects)))
            steps[b.label] = out
        self._plans[f.name] = steps
        return steps

    def analyze(self, f: Function) -> _Summ:
        cfg = self.cfgs[f.name]
        steps = self.plan(f)
        L = self.L
        for i in cfg.nodes:
            L.pop(i, None)
        base = self.seed(f.name)
        init = dict(base.symbits)
        out_state: dict[str, tuple[dict, dict]] = {}
        cap = (len(cfg.block_order) + 2) * (self.module.size + len(init) + 2)
        rounds = 0
        changed = True
        while changed:
            rounds += 1
            if rounds > cap:
                raise RuntimeError(f"internal error: no fixpoint for {f.name} after {cap} rounds")
            changed = False
            for label in cfg.block_order:
                if label == f.entry:
                    own, ctx = dict(init), {}
                else:
                    preds = [out_state[p] for p in cfg.block_preds[label] if p in out_state]
                    own = _merge([p[0] for p in preds])
                    ctx = _merge([p[1] for p in preds]) if self.contexts else {}
                for ins, deps, store, eff in steps[label]:
                    lp = L.get(ins.id, 1 << ins.id)
                    for j in deps:
                        lp |= L.get(j, 1 << j)
                    if eff is None:
                        self.call(f, ins, lp, own, ctx)
                    else:
                        for x in eff.reads:
                            lp |= own.get(x, 0)
                        for x in eff.writes:
                            own[x] = own.get(x, 0) | lp if eff.multi else lp
                    if store and L.get(ins.id) != lp:
                        L[ins.id] = lp
                        changed = True
                prev = out_state.get(label)
                if prev is None or prev[0] != own or prev[1] != ctx:
                    out_state[label] = (own, ctx)
                    changed = True
        exits = [out_state[b] for b in cfg.exit_blocks if b in out_state]
        return _Summ(f.name, f.formals, base.globals, base.symbits,
                     _merge([e[0] for e in exits]), _merge([e[1] for e in exits]))

    def call(self, f: Function, ins: Instruction, lsite: int, own: dict, ctx: dict) -> None:
        q = ins.callee
        callee = self.summaries.get(q) or self.seed(q)
        if len(ins.operands) < len(callee.formals):
            raise ArityMismatch(f"call at {ins.id} passes {len(ins.operands)} arguments to "
                                f"{q}, which takes {len(callee.formals)}")
        spec: dict[int, int] = {}
        for y, actual in zip(callee.formals, ins.operands):
            acc = 0
            for z in operand_reads(f, actual):
                acc |= own.get(z, 0)
            spec[callee.symbits[y]] = acc
        for g in callee.globals:
            spec[callee.symbits[g]] = own.get(g, 0)
        mask = 0
        for b in spec:
            mask |= b
        memo: dict[int, int] = {}

        def subst(s: int) -> int:
            m = s & mask
            if not m:
                return s | lsite
            r = memo.get(s)
            if r is None:
                r = s & ~mask
                for b, v in spec.items():
                    if m & b:
                        r |= v
                r |= lsite
                memo[s] = r
            return r

        tprime: dict[str, int] = {}
        for x, t in callee.T.items():
            key = qualify(q, x)
            if x in callee.globals:
                value = subst(t)
                if callee.is_out(x):
                    tprime[key] = value
                tprime[frame_key(q, x)] = value
            elif x in callee.symbits and not callee.is_out(x):
                tprime[key] = lsite
            else:
                tprime[key] = subst(t)
        deeper = {key: subst(t) for key, t in callee.ctx.items()}
        self.records[ins.id] = (q, spec, tprime, deeper)

        for g in callee.globals:
            if callee.is_out(g):
                own[g] = tprime[g]
        if self.contexts:
            for table in (tprime, deeper):
                for key, t in table.items():
                    if key in callee.globals:
                        continue
                    ctx[key] = ctx.get(key, 0) | t
        for y, actual in zip(callee.formals, ins.operands):
            if callee.is_out(y) and actual.is_name:
                own[f.memory_object(actual.value)] = tprime[qualify(q, y)]
        if ins.result:
            own[ins.result] = tprime.get(return_key(q), lsite)


def _globals_closure(module: Module, cg: CallGraph) -> dict[str, frozenset[str]]:
    direct = {}
    for f in module.functions:
        names = set()
        for ins in f.instructions():
            names.update(op.value for op in ins.operands
                         if op.value.startswith("@") and op.value in module.global_names)
        direct[f.name] = names
    out: dict[str, frozenset[str]] = {}
    for scc in scc_order(cg):
        acc = set()
        for p in scc:
            acc |= direct[p]
            for q in cg.callees(p):
                if q not in scc:
                    acc |= out[q]
        for p in scc:
            out[p] = frozenset(acc)
    return out


def _solve_recursive(eng: _Engine, module: Module, members: list[str]) -> None:
    """Summaries of a recursive component.

    First find which formals and globals each member may modify, starting
    from summaries that modify nothing.  Then restart from summaries that
    modify exactly those but contribute no dependences of their own, and
    iterate to the least fixpoint.  Starting the second phase from the
    do-nothing summaries instead would keep definitions that a recursive
    call always overwrites.
    """
    limit = 4 * (module.size + 2)
    for _ in range(limit):
        before = {n: eng.summaries[n].outs() for n in members if n in eng.summaries}
        for name in members:
            eng.summaries[name] = eng.analyze(module.function(name))
        if before == {n: eng.summaries[n].outs() for n in members}:
            break
    else:
        raise RuntimeError(f"internal error: modified sets of {members} did not stabilise")
    for name in members:
        s = eng.summaries[name]
        base = eng.seed(name)
        for x in s.outs():
            base.T[x] = 0
        eng.summaries[name] = base
    for _ in range(limit):
        stable = True
        for name in members:
            s = eng.analyze(module.function(name))
            if not s.same(eng.summaries.get(name)):
                stable = False
            eng.summaries[name] = s
        if stable:
            return
    raise RuntimeError(f"internal error: summaries of {members} did not stabilise")


def inter_slice(module: Module, mode: str = "fast",
                effects: dict[str, ExternalEffect] | None = None,
                contexts: bool = False) -> SliceResult:
    """Analyse every procedure bottom-up over the call graph.

    Slices of values inside callees are assembled afterwards from the
    recorded call-site instantiations.  With ``contexts`` the analysis
    instead carries them up through every caller's slice table as it
    goes; the results are identical, only slower.
    """
    eng = _Engine(module, mode, effects if effects is not None else load_effects(), contexts)
    cg = build_callgraph(module)
    eng.globals_of = _globals_closure(module, cg)
    position = {f.name: i for i, f in enumerate(module.functions)}
    for scc in scc_order(cg):
        members = sorted(scc, key=position.__getitem__)
        if is_recursive(cg, scc):
            _solve_recursive(eng, module, members)
        else:
            eng.summaries[members[0]] = eng.analyze(module.function(members[0]))

    roots = [n for c in root_components(cg) for n in sorted(c, key=position.__getitem__)]
    callers = _Callers(eng, cg)
    final: dict[str, int] | None = None
    if contexts:
        final = {}
        for r in roots:
            s = eng.summaries[r]
            for x, t in s.T.items():
                key = frame_key(r, x)
                final[key] = final.get(key, 0) | t
            for key, t in s.ctx.items():
                final[key] = final.get(key, 0) | t
        final = {k: v & eng.bits.concrete_mask for k, v in final.items()}
    expanded = callers.rows() if mode == "full" else None
    return SliceResult(module, mode, eng, callers, final, cg, roots, expanded)


def intra_slice(function: Function, mode: str = "full", module: Module | None = None,
                effects: dict[str, ExternalEffect] | None = None
                ) -> tuple[dict[int, frozenset], ProcSummary]:
    """Analyse one call-free procedure on its own."""
    if module is None:
        module = Module("single", (), (), (function,))
    for ins in function.instructions():
        if ins.is_call and ins.callee in module.function_map:
            raise ValueError(f"instruction {ins.id} calls {ins.callee}; use inter_slice")
    eng = _Engine(module, mode, effects if effects is not None else load_effects())
    eng.globals_of = {function.name: frozenset(
        op.value for ins in function.instructions() for op in ins.operands
        if op.value in module.global_names)}
    s = eng.analyze(function)
    d = eng.bits.decode
    L = {i: d(b) for i, b in sorted(eng.L.items())}
    return L, ProcSummary(s.proc, s.formals, s.globals, {x: d(t) for x, t in s.T.items()},
                          {k: d(t) for k, t in s.ctx.items()})


# ---------------------------------------------------------------------------
# calling contexts

class _Callers:
    """What each procedure's frames inherit from their callers.

    ``control[Q]`` is the union of the concrete rows of all call sites of
    Q; ``symbols[Q][l_y]`` is the union, over those sites, of the concrete
    slice passed for y.  Callers are processed before callees, and each
    recursive component is iterated to a fixpoint.
    """

    def __init__(self, eng: _Engine, cg: CallGraph):
        self.eng = eng
        self.control: dict[str, int] = {}
        self.symbols: dict[str, dict[int, int]] = {}
        self._values: dict[str, int] = {}
        limit = 4 * (eng.module.size + 2)
        for scc in reversed(scc_order(cg)):
            for _ in range(limit):
                stable = True
                for q in sorted(scc):
                    ctl = 0
                    table: dict[int, int] = {}
                    for caller, site in cg.sites_of(q):
                        ctl |= self.row(caller, site)
                        for b, value in eng.records[site][1].items():
                            table[b] = table.get(b, 0) | self.expand(caller, value)
                    if self.control.get(q) != ctl or self.symbols.get(q) != table:
                        stable = False
                    self.control[q] = ctl
                    self.symbols[q] = table
                if stable:
                    break
            else:
                raise RuntimeError(f"internal error: contexts of {sorted(scc)} did not stabilise")

    def expand(self, proc: str, s: int) -> int:
        out = s & self.eng.bits.concrete_mask
        if out != s:
            # only the procedure's own symbols can occur in its sets
            for b, v in self.symbols.get(proc, {}).items():
                if s & b:
                    out |= v
        return out

    def row(self, proc: str, i: int) -> int:
        return self.expand(proc, self.eng.L.get(i, 1 << i)) | self.control.get(proc, 0)

    def rows(self) -> dict[int, int]:
        out = {}
        for f in self.eng.module.functions:
            for i in self.eng.cfgs[f.name].nodes:
                out[i] = self.row(f.name, i)
        return out

    def keys(self) -> list[str]:
        return [frame_key(p, x) for p, s in self.eng.summaries.items() for x in s.T]

    def value(self, key: str) -> int:
        """Concrete slice of a value at the end of its procedure, over all frames."""
        v = self._values.get(key)
        if v is None:
            proc, name = split_key(key)
            if name == proc:
                name = key  # return values are stored under their full key
            s = self.eng.summaries.get(proc)
            t = None if s is None else s.T.get(name)
            if t is None:
                v = 0
            elif name in s.formals and not s.is_out(name):
                v = self.control.get(proc, 0)
            else:
                v = self.expand(proc, t) | self.control.get(proc, 0)
            self._values[key] = v
        return v


# ---------------------------------------------------------------------------
# queries

def _check_variable(module: Module, function: str, var: str) -> None:
    if function not in module.function_map:
        raise UnknownVariable(f"unknown function {function}")
    f = module.function(function)
    if var.startswith("@"):
        if var in module.global_names or var == function:
            return
        raise UnknownVariable(f"unknown global {var}")
    names = set(f.formals) | {i.result for i in f.instructions() if i.result}
    if var not in names:
        raise UnknownVariable(f"{function} has no value named {var}")


def _slice_key(function: str, var: str) -> str:
    return return_key(function) if var == function else frame_key(function, var)


def _criteria_list(criteria) -> list[tuple[str, str]]:
    if isinstance(criteria, tuple) and len(criteria) == 2 and isinstance(criteria[0], str):
        return [criteria]
    return list(criteria)


def backward_slice(result: SliceResult, criteria: Iterable[tuple[str, str]] | tuple[str, str]
                   ) -> frozenset[int]:
    """End-of-procedure backward slice; several criteria give the union."""
    acc = 0
    for function, var in _criteria_list(criteria):
        _check_variable(result.module, function, var)
        acc |= result._value(_slice_key(function, var))
    return result._bits.decode_ints(acc)


def referenced_names(module: Module, ins: Instruction,
                     effects: dict[str, ExternalEffect] | None = None) -> set[str]:
    """Qualified names an instruction mentions, for forward slicing."""
    f = module.owner[ins.id]
    names = set(ref_set(ins))
    if not (ins.is_call and ins.callee in module.function_map):
        names |= data_effect(f, ins, effects).reads
    else:
        for op in ins.operands:
            names |= operand_reads(f, op)
    return {qualify(f.name, n) for n in names}


def forward_slice(result: SliceResult, criteria: Iterable[tuple[str, str]] | tuple[str, str]
                  ) -> frozenset[int]:
    """Instructions whose dependence row holds an instruction that reads
    the criterion variable."""
    if result._expanded is None:
        raise ModeError("forward slicing needs a full-table analysis (mode='full')")
    keys = set()
    for function, var in _criteria_list(criteria):
        _check_variable(result.module, function, var)
        keys.add(return_key(function) if var == function else qualify(function, var))
    readers = 0
    for i, ins in result.module.instructions.items():
        if i in result._expanded and referenced_names(result.module, ins) & keys:
            readers |= 1 << i
    return frozenset(i for i, row in result._expanded.items() if row & readers)


def auto_criteria(module: Module) -> list[tuple[str, str]]:
    """Each global at the end of @main (or of each root procedure when
    there is no @main), and each stack variable at the end of the
    procedure that allocates it."""
    out: list[tuple[str, str]] = []
    if module.globals:
        if "@main" in module.function_map:
            anchors = ["@main"]
        else:
            cg = build_callgraph(module)
            position = {f.name: i for i, f in enumerate(module.functions)}
            anchors = sorted((n for c in root_components(cg) for n in c),
                             key=position.__getitem__)[:1]
        for g in module.globals:
            out.extend((a, g.name) for a in anchors)
    for f in module.functions:
        out.extend((f.name, x) for x in f.locals)
    return out
