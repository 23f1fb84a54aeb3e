"""Seeded random generator of valid mini-IR modules for differential testing.

Generated programs have reducible control flow built from structured
statements (assignments, if/else with phi joins, while loops, switches,
calls), every block is reachable, every loop has an exit, and stack
variables are allocated in the entry block.  Each call passes pointers
to distinct memory objects, and globals are only accessed directly,
never passed by pointer.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ir_model import Module
from .ir_parser import parse_module


@dataclass
class GenConfig:
    max_procs: int = 5
    max_instrs: int = 200
    max_globals: int = 3
    recursion: bool = True
    calls: bool = True
    loop_bias: float = 0.2
    max_depth: int = 3


@dataclass
class _Sig:
    name: str
    params: list[tuple[str, str]]  # (type, name)
    returns: bool


@dataclass
class _Proc:
    sig: _Sig
    budget: int
    lines: list[str] = field(default_factory=list)
    label: str = "entry"
    count: int = 0
    reg: int = 0
    lab: int = 0
    scalars: list[str] = field(default_factory=list)   # memory objects holding one i32
    arrays: list[str] = field(default_factory=list)


class _Gen:
    def __init__(self, seed: int, cfg: GenConfig):
        self.rng = random.Random(seed)
        self.cfg = cfg
        self.globals: list[str] = []
        self.sigs: list[_Sig] = []
        self.uses_printf = False
        self.uses_scanf = False

    # -- helpers ------------------------------------------------------------
    def emit(self, p: _Proc, text: str) -> None:
        p.lines.append(f"  {text}")
        p.count += 1

    def new_reg(self, p: _Proc) -> str:
        p.reg += 1
        return f"%r{p.reg}"

    def new_label(self, p: _Proc, stem: str) -> str:
        p.lab += 1
        return f"{stem}{p.lab}"

    def start_block(self, p: _Proc, label: str) -> None:
        p.lines.append(f"{label}:")
        p.label = label

    def objects(self, p: _Proc) -> list[str]:
        return p.scalars + self.globals

    def pointer_to(self, p: _Proc, obj: str) -> str:
        """A pointer register or name designating obj (array elements via gep)."""
        if obj in p.arrays:
            r = self.new_reg(p)
            idx = self.rng.randrange(4)
            self.emit(p, f"{r} = getelementptr [4 x i32], [4 x i32]* {obj}, i32 0, i32 {idx}")
            return r
        return obj

    def value(self, p: _Proc) -> str:
        """An i32 operand: a fresh load, a scalar formal or a constant."""
        scal = [n for t, n in p.sig.params if t == "i32"]
        k = self.rng.random()
        mem = self.objects(p) + p.arrays
        if mem and k < 0.7:
            obj = self.rng.choice(mem)
            ptr = self.pointer_to(p, obj)
            r = self.new_reg(p)
            self.emit(p, f"{r} = load i32, i32* {ptr}")
            return r
        if scal and k < 0.9:
            return self.rng.choice(scal)
        return str(self.rng.randrange(-3, 10))

    def expr(self, p: _Proc) -> str:
        a = self.value(p)
        if self.rng.random() < 0.25:
            return a
        b = self.value(p)
        r = self.new_reg(p)
        op = self.rng.choice(["add", "sub", "mul", "and", "or", "xor"])
        self.emit(p, f"{r} = {op} i32 {a}, {b}")
        if self.rng.random() < 0.15:
            c = self.new_reg(p)
            self.emit(p, f"{c} = icmp sgt i32 {r}, {self.value(p)}")
            s = self.new_reg(p)
            self.emit(p, f"{s} = select i1 {c}, i32 {r}, i32 {self.value(p)}")
            return s
        return r

    def target(self, p: _Proc) -> str:
        mem = self.objects(p) + p.arrays
        return self.pointer_to(p, self.rng.choice(mem))

    def cond(self, p: _Proc) -> str:
        a = self.value(p)
        r = self.new_reg(p)
        pred = self.rng.choice(["slt", "sle", "sgt", "eq", "ne"])
        self.emit(p, f"{r} = icmp {pred} i32 {a}, {self.rng.randrange(0, 10)}")
        return r

    # -- statements ---------------------------------------------------------
    def stmts(self, p: _Proc, depth: int, n: int) -> None:
        for _ in range(n):
            if p.count >= p.budget:
                return
            self.stmt(p, depth)

    def stmt(self, p: _Proc, depth: int) -> None:
        k = self.rng.random()
        nested = depth < self.cfg.max_depth
        callees = self.callees(p)
        if nested and k < self.cfg.loop_bias:
            self.loop(p, depth)
        elif nested and k < self.cfg.loop_bias + 0.15:
            self.branch(p, depth)
        elif nested and k < self.cfg.loop_bias + 0.2:
            self.switch(p, depth)
        elif callees and k < self.cfg.loop_bias + 0.4:
            self.call(p, self.rng.choice(callees))
        elif k < self.cfg.loop_bias + 0.45:
            self.external(p)
        else:
            v = self.expr(p)
            self.emit(p, f"store i32 {v}, i32* {self.target(p)}")

    def loop(self, p: _Proc, depth: int) -> None:
        head, body, done = (self.new_label(p, s) for s in ("loop", "body", "done"))
        self.emit(p, f"br label %{head}")
        self.start_block(p, head)
        c = self.cond(p)
        self.emit(p, f"br i1 {c}, label %{body}, label %{done}")
        self.start_block(p, body)
        self.stmts(p, depth + 1, self.rng.randint(1, 3))
        self.emit(p, f"br label %{head}")
        self.start_block(p, done)

    def branch(self, p: _Proc, depth: int) -> None:
        then, other, join = (self.new_label(p, s) for s in ("then", "else", "join"))
        c = self.cond(p)
        self.emit(p, f"br i1 {c}, label %{then}, label %{other}")
        ends = []
        for lab in (then, other):
            self.start_block(p, lab)
            self.stmts(p, depth + 1, self.rng.randint(0, 2))
            v = self.value(p)
            ends.append((v, p.label))
            self.emit(p, f"br label %{join}")
        self.start_block(p, join)
        if self.rng.random() < 0.7:
            r = self.new_reg(p)
            pairs = ", ".join(f"[{v}, %{lab}]" for v, lab in ends)
            self.emit(p, f"{r} = phi i32 {pairs}")
            self.emit(p, f"store i32 {r}, i32* {self.target(p)}")

    def switch(self, p: _Proc, depth: int) -> None:
        labels = [self.new_label(p, "case") for _ in range(self.rng.randint(1, 3))]
        dflt, join = self.new_label(p, "default"), self.new_label(p, "merge")
        v = self.value(p)
        cases = " ".join(f"i32 {i}, label %{lab}" for i, lab in enumerate(labels))
        self.emit(p, f"switch i32 {v}, label %{dflt} [{cases}]")
        for lab in labels + [dflt]:
            self.start_block(p, lab)
            self.stmts(p, depth + 1, self.rng.randint(0, 2))
            self.emit(p, f"br label %{join}")
        self.start_block(p, join)

    def callees(self, p: _Proc) -> list[_Sig]:
        if not self.cfg.calls:
            return []
        idx = next(i for i, s in enumerate(self.sigs) if s is p.sig)
        out = []
        for j, s in enumerate(self.sigs):
            if s.name == "@main":
                continue
            if self.cfg.recursion or j > idx:
                out.append(s)
        return out

    def call(self, p: _Proc, q: _Sig) -> None:
        pool = p.scalars + p.arrays
        self.rng.shuffle(pool)
        args = []
        for t, _ in q.params:
            if t == "i32*":
                if not pool:
                    return
                args.append(f"i32* {self.pointer_to(p, pool.pop())}")
            else:
                args.append(f"i32 {self.value(p)}")
        if q.returns:
            r = self.new_reg(p)
            self.emit(p, f"{r} = call i32 {q.name}({', '.join(args)})")
            if self.rng.random() < 0.8:
                self.emit(p, f"store i32 {r}, i32* {self.target(p)}")
        else:
            self.emit(p, f"call void {q.name}({', '.join(args)})")

    def external(self, p: _Proc) -> None:
        if p.scalars and self.rng.random() < 0.4:
            self.uses_scanf = True
            obj = self.rng.choice(p.scalars)
            self.emit(p, f"{self.new_reg(p)} = call i32 @scanf(..., i32* {obj})")
        else:
            self.uses_printf = True
            self.emit(p, f"{self.new_reg(p)} = call i32 @printf(..., i32 {self.value(p)})")

    # -- procedures ---------------------------------------------------------
    def signature(self, name: str, main: bool) -> _Sig:
        if main:
            return _Sig(name, [], True)
        params = []
        for k in range(self.rng.randint(0, 3)):
            t = "i32*" if self.rng.random() < 0.6 else "i32"
            params.append((t, f"%p{k}"))
        return _Sig(name, params, self.rng.random() < 0.5)

    def procedure(self, sig: _Sig, budget: int) -> list[str]:
        p = _Proc(sig, budget)
        p.scalars = [n for t, n in sig.params if t == "i32*"]
        params = ", ".join(f"{t} {n}" for t, n in sig.params)
        self.start_block(p, "entry")
        for k in range(self.rng.randint(1, 3)):
            name = f"%v{k}"
            self.emit(p, f"{name} = alloca i32")
            p.scalars.append(name)
        if self.rng.random() < 0.3:
            self.emit(p, "%arr = alloca [4 x i32]")
            p.arrays.append("%arr")
        for name in p.scalars[len([1 for t, _ in sig.params if t == "i32*"]):]:
            if self.rng.random() < 0.8:
                self.emit(p, f"store i32 {self.rng.randrange(10)}, i32* {name}")
        self.stmts(p, 0, 1000)
        if sig.returns:
            self.emit(p, f"ret i32 {self.value(p)}")
        else:
            self.emit(p, "ret void")
        rtype = "i32" if sig.returns else "void"
        return [f"define {rtype} {sig.name}({params}) {{", *p.lines, "}", ""]

    def module(self, single: bool) -> str:
        for k in range(self.rng.randint(0, self.cfg.max_globals)):
            self.globals.append(f"@g{k}")
        n = 1 if single else self.rng.randint(1, max(1, self.cfg.max_procs))
        if single:
            sig = self.signature("@f", False)
            self.sigs = [sig]
        else:
            self.sigs = [self.signature("@main", True)] + [
                self.signature(f"@f{k}", False) for k in range(1, n)]
        budget = max(8, self.cfg.max_instrs // n)
        bodies = []
        for sig in self.sigs:
            bodies.extend(self.procedure(sig, budget))
        head = []
        if self.uses_printf:
            head.append("declare i32 @printf(...)")
        if self.uses_scanf:
            head.append("declare i32 @scanf(...)")
        head.extend(f"{g} = global i32 {self.rng.randrange(10)}" for g in self.globals)
        return "\n".join(head + [""] + bodies)


def generate_text(seed: int, config: GenConfig | None = None, single: bool = False) -> str:
    """Module text for a seed; identical seeds and configs give identical text.
    ``single`` gives one call-free procedure @f."""
    cfg = config or GenConfig()
    if single:
        cfg = GenConfig(**{**cfg.__dict__, "calls": False})
    # slack for the statements that close open constructs
    for shrink in range(8):
        trial = GenConfig(**{**cfg.__dict__,
                             "max_instrs": max(10, int(cfg.max_instrs * (0.8 ** shrink)))})
        text = _Gen(seed, trial).module(single)
        if parse_module(text).size <= cfg.max_instrs:
            return text
    return text


def generate_module(seed: int, config: GenConfig | None = None, single: bool = False) -> Module:
    return parse_module(generate_text(seed, config, single), name=f"gen{seed}")


def generate_loops_text(seed: int, loops: int = 50, variables: int = 6) -> str:
    """One procedure of ``loops`` while loops over a few stack variables,
    some nested, in the style of loop-counting benchmarks."""
    rng = random.Random(seed)
    names = [f"%v{k}" for k in range(variables)]
    lines = ["define i32 @main() {", "entry:"]
    lines += [f"  {n} = alloca i32" for n in names]
    lines += [f"  store i32 {rng.randrange(10)}, i32* {n}" for n in names]
    reg = 0

    def fresh() -> str:
        nonlocal reg
        reg += 1
        return f"%r{reg}"

    def body(k: int) -> list[str]:
        out = []
        for _ in range(rng.randint(1, 3)):
            a, b, c = rng.sample(names, 3)
            ra, rb, rs = fresh(), fresh(), fresh()
            op = rng.choice(["add", "sub", "mul", "xor"])
            out += [f"  {ra} = load i32, i32* {a}", f"  {rb} = load i32, i32* {b}",
                    f"  {rs} = {op} i32 {ra}, {rb}", f"  store i32 {rs}, i32* {c}"]
        return out

    open_loops: list[str] = []
    for k in range(loops):
        head, inner, done = f"loop{k}", f"body{k}", f"done{k}"
        a = rng.choice(names)
        rc, rt = fresh(), fresh()
        lines += [f"  br label %{head}", f"{head}:", f"  {rc} = load i32, i32* {a}",
                  f"  {rt} = icmp slt i32 {rc}, {rng.randrange(5, 50)}",
                  f"  br i1 {rt}, label %{inner}, label %{done}", f"{inner}:"]
        lines += body(k)
        open_loops.append(k)
        # close some loops so nesting stays shallow
        while open_loops and (len(open_loops) > 3 or rng.random() < 0.6):
            j = open_loops.pop()
            lines += body(j) + [f"  br label %loop{j}", f"done{j}:"]
    while open_loops:
        j = open_loops.pop()
        lines += [f"  br label %loop{j}", f"done{j}:"]
    r = fresh()
    lines += [f"  {r} = load i32, i32* {names[0]}", f"  ret i32 {r}", "}", ""]
    return "\n".join(lines)
