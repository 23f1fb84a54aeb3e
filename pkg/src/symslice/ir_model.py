"""Mini-IR program representation.

A module is a list of globals, external declarations and function
definitions.  Instructions carry a module-wide 1-based id in textual
order.  Value names keep their LLVM prefix: ``%`` for locals, ``@`` for
globals and functions.

Besides the syntactic REF/DEF sets this module owns the alias model used
by every slicer in the package: a pointer names the memory object it
points to, and ``getelementptr``/pointer casts alias their base object.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

TERMINATORS = frozenset({"br", "switch", "ret", "unreachable"})
BINOPS = frozenset({
    "add", "sub", "mul", "udiv", "sdiv", "urem", "srem",
    "and", "or", "xor", "shl", "lshr", "ashr",
    "fadd", "fsub", "fmul", "fdiv", "frem",
})
CASTS = frozenset({
    "trunc", "zext", "sext", "fptrunc", "fpext", "fptoui", "fptosi",
    "uitofp", "sitofp", "ptrtoint", "inttoptr", "bitcast", "addrspacecast",
})
MULTI_VALUED = frozenset({"phi", "select"})
CONSTANT_WORDS = frozenset({"true", "false", "null", "undef", "poison", "zeroinitializer"})


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int


@dataclass(frozen=True)
class Operand:
    """A used value, optionally with the type written next to it."""

    value: str
    type: str | None = None

    @property
    def is_name(self) -> bool:
        return self.value[:1] in ("%", "@")

    @property
    def is_pointer(self) -> bool:
        return self.type is not None and (self.type.endswith("*") or self.type == "ptr")


@dataclass(frozen=True)
class Instruction:
    """One IR instruction.

    ``labels`` holds branch targets (``br``), the default followed by case
    targets (``switch``) or the predecessor label of each incoming value
    (``phi``, parallel to ``operands``).
    """

    id: int
    opcode: str
    result: str | None = None
    operands: tuple[Operand, ...] = ()
    labels: tuple[str, ...] = ()
    type: str | None = None
    predicate: str | None = None
    callee: str | None = None
    elided: bool = False
    span: SourceSpan | None = field(default=None, compare=False)

    @property
    def is_terminator(self) -> bool:
        return self.opcode in TERMINATORS

    @property
    def is_cond_branch(self) -> bool:
        return (self.opcode == "br" and len(self.labels) == 2) or self.opcode == "switch"

    @property
    def is_call(self) -> bool:
        return self.opcode == "call"

    @property
    def is_multi_valued(self) -> bool:
        return self.opcode in MULTI_VALUED


@dataclass(frozen=True)
class BasicBlock:
    label: str
    instructions: tuple[Instruction, ...]

    @property
    def terminator(self) -> Instruction | None:
        if self.instructions and self.instructions[-1].is_terminator:
            return self.instructions[-1]
        return None

    def successors(self) -> tuple[str, ...]:
        term = self.terminator
        if term is None or term.opcode not in ("br", "switch"):
            return ()
        return term.labels


@dataclass(frozen=True)
class Param:
    name: str
    type: str

    @property
    def is_pointer(self) -> bool:
        return self.type.endswith("*") or self.type == "ptr"


@dataclass(frozen=True)
class Function:
    name: str
    return_type: str
    params: tuple[Param, ...]
    blocks: tuple[BasicBlock, ...]

    @property
    def formals(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def entry(self) -> str:
        return self.blocks[0].label

    @property
    def returns_value(self) -> bool:
        return self.return_type != "void"

    def instructions(self):
        for block in self.blocks:
            yield from block.instructions

    @cached_property
    def block_of(self) -> dict[str, BasicBlock]:
        return {b.label: b for b in self.blocks}

    @cached_property
    def pointer_base(self) -> dict[str, str]:
        """Map from each register that aliases another pointer to its base."""
        base: dict[str, str] = {}
        for ins in self.instructions():
            if ins.result is None or not ins.operands:
                continue
            src = ins.operands[0]
            if ins.opcode == "getelementptr" and src.is_name:
                base[ins.result] = src.value
            elif ins.opcode in ("bitcast", "addrspacecast") and src.is_name and src.is_pointer:
                base[ins.result] = src.value
        return base

    def memory_object(self, name: str) -> str:
        """The memory object a pointer value designates under the alias model."""
        seen = set()
        while name in self.pointer_base and name not in seen:
            seen.add(name)
            name = self.pointer_base[name]
        return name

    @cached_property
    def locals(self) -> tuple[str, ...]:
        """Stack variables allocated by the function, in textual order."""
        return tuple(i.result for i in self.instructions() if i.opcode == "alloca" and i.result)


@dataclass(frozen=True)
class GlobalDef:
    name: str
    type: str
    initializer: str
    constant: bool = False


@dataclass(frozen=True)
class ExternalDecl:
    name: str
    return_type: str
    param_types: tuple[str, ...]
    variadic: bool = False

    @property
    def arity(self) -> int:
        return len(self.param_types)


@dataclass(frozen=True)
class Module:
    name: str
    globals: tuple[GlobalDef, ...]
    externals: tuple[ExternalDecl, ...]
    functions: tuple[Function, ...]

    @cached_property
    def function_map(self) -> dict[str, Function]:
        return {f.name: f for f in self.functions}

    @cached_property
    def external_map(self) -> dict[str, ExternalDecl]:
        return {e.name: e for e in self.externals}

    @cached_property
    def global_names(self) -> frozenset[str]:
        return frozenset(g.name for g in self.globals)

    @cached_property
    def instructions(self) -> dict[int, Instruction]:
        return number_instructions(self)

    @cached_property
    def owner(self) -> dict[int, Function]:
        return {i.id: f for f in self.functions for i in f.instructions()}

    @property
    def size(self) -> int:
        return len(self.instructions)

    def function(self, name: str) -> Function:
        return self.function_map[name]


@dataclass(frozen=True)
class Diagnostic:
    message: str
    instr: int | None = None
    function: str | None = None

    def __str__(self) -> str:
        where = []
        if self.function:
            where.append(self.function)
        if self.instr is not None:
            where.append(f"instr {self.instr}")
        return f"{' '.join(where)}: {self.message}" if where else self.message


# ---------------------------------------------------------------------------
# names

def qualify(function: str, name: str) -> str:
    """Module-wide key for a value name; globals are already unique."""
    if name.startswith("@") or ":" in name:
        return name
    return f"{function}:{name}"


def return_key(function: str) -> str:
    """Key of the out parameter that carries a function's return value."""
    return f"{function}:{function}"


def frame_key(function: str, name: str) -> str:
    """Key of a value as seen in one procedure's frame; unlike ``qualify``
    this also ties globals to the procedure whose end they are read at."""
    if ":" in name:
        return name
    return f"{function}:{name}"


def split_key(key: str) -> tuple[str | None, str]:
    if ":" not in key:
        return None, key
    func, _, name = key.partition(":")
    return func, name


# ---------------------------------------------------------------------------
# REF / DEF

def _names(operands) -> set[str]:
    return {op.value for op in operands if op.is_name}


def ref_set(instr: Instruction) -> set[str]:
    """Non-constant value names read by the instruction."""
    if instr.opcode == "store":
        return _names(instr.operands[:1])
    return _names(instr.operands)


def def_set(instr: Instruction) -> set[str]:
    """Value names the instruction defines or may modify (syntactic)."""
    out: set[str] = set()
    if instr.result:
        out.add(instr.result)
    if instr.opcode == "store":
        ptr = instr.operands[1]
        if ptr.is_name:
            out.add(ptr.value)
    elif instr.opcode == "call":
        out.update(op.value for op in instr.operands if op.is_name and op.is_pointer)
    return out


def number_instructions(module: Module) -> dict[int, Instruction]:
    table: dict[int, Instruction] = {}
    for f in module.functions:
        for ins in f.instructions():
            table[ins.id] = ins
    return table


# ---------------------------------------------------------------------------
# external procedures

@dataclass(frozen=True)
class ExternalEffect:
    """Read/write behaviour of an external procedure on its arguments.

    Scalar arguments are always read.  Pointer arguments are read when
    their index is in ``read_args`` (or any index with ``variadic_reads``)
    and overwritten when their index is in ``write_args`` (or any index
    with ``variadic_pointer_writes``).
    """

    name: str
    read_args: frozenset[int] = frozenset()
    write_args: frozenset[int] = frozenset()
    variadic_pointer_writes: bool = False
    variadic_reads: bool = False

    def reads(self, index: int) -> bool:
        return self.variadic_reads or index in self.read_args

    def writes(self, index: int) -> bool:
        return self.variadic_pointer_writes or index in self.write_args


def _reader(name: str) -> ExternalEffect:
    return ExternalEffect(name, variadic_reads=True)


def _copier(name: str) -> ExternalEffect:
    return ExternalEffect(name, read_args=frozenset({1}), write_args=frozenset({0}))


DEFAULT_EFFECTS: dict[str, ExternalEffect] = {
    e.name: e
    for e in (
        [_reader(n) for n in ("@printf", "@puts", "@putchar", "@fprintf", "@abs", "@exit", "@strlen")]
        + [ExternalEffect(n, variadic_pointer_writes=True) for n in ("@scanf", "@__isoc99_scanf", "@gets")]
        + [ExternalEffect("@sscanf", read_args=frozenset({0}), variadic_pointer_writes=True),
           ExternalEffect("@fscanf", read_args=frozenset({0}), variadic_pointer_writes=True)]
        + [_copier(n) for n in ("@memcpy", "@memmove", "@strcpy", "@strncpy",
                                "@llvm.memcpy", "@llvm.memmove",
                                "@llvm.memcpy.p0i8.p0i8.i64", "@llvm.memcpy.p0i8.p0i8.i32")]
        + [ExternalEffect(n, read_args=frozenset({1}), write_args=frozenset({0}))
           for n in ("@memset", "@llvm.memset")]
    )
}


class EffectsError(ValueError):
    pass


def load_effects(path: str | os.PathLike | None = None) -> dict[str, ExternalEffect]:
    """Default effects, overridden by a JSON file if one is given.

    Falls back to the ``SYMSLICE_EFFECTS`` environment variable.  The file
    maps function names to objects with optional keys ``reads``,
    ``writes`` (index lists), ``variadic_reads`` and
    ``variadic_pointer_writes``.
    """
    table = dict(DEFAULT_EFFECTS)
    if path is None:
        path = os.environ.get("SYMSLICE_EFFECTS") or None
    if path is None:
        return table
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise EffectsError(f"cannot read effects file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise EffectsError("effects file must hold a JSON object")
    for name, spec in raw.items():
        if not isinstance(spec, dict):
            raise EffectsError(f"effect for {name} must be an object")
        key = name if name.startswith("@") else "@" + name
        table[key] = ExternalEffect(
            key,
            read_args=frozenset(int(i) for i in spec.get("reads", ())),
            write_args=frozenset(int(i) for i in spec.get("writes", ())),
            variadic_pointer_writes=bool(spec.get("variadic_pointer_writes", False)),
            variadic_reads=bool(spec.get("variadic_reads", False)),
        )
    return table


def effect_for(name: str, effects: dict[str, ExternalEffect]) -> ExternalEffect:
    # unknown externals read everything and write nothing but their result
    return effects.get(name) or ExternalEffect(name, variadic_reads=True)


# ---------------------------------------------------------------------------
# data effects under the alias model

@dataclass(frozen=True)
class DataEffect:
    reads: frozenset[str]
    writes: frozenset[str]
    multi: bool = False


def operand_reads(function: Function, op: Operand) -> set[str]:
    """Names whose value flows into an operand: the value itself, and for
    a derived pointer also the object it designates."""
    if not op.is_name:
        return set()
    obj = function.memory_object(op.value)
    return {op.value} if obj == op.value else {op.value, obj}


def data_effect(function: Function, instr: Instruction,
                effects: dict[str, ExternalEffect] | None = None) -> DataEffect:
    """Unqualified reads and writes of a non-procedure-call instruction.

    Calls to defined functions are not covered here; each slicer handles
    them through its own interprocedural machinery.  ``ret v`` writes the
    function's return key (see ``return_key``).
    """
    op = instr.opcode
    if op == "load":
        ptr = instr.operands[0]
        reads = operand_reads(function, ptr)
        return DataEffect(frozenset(reads), frozenset({instr.result}) if instr.result else frozenset())
    if op == "store":
        val, ptr = instr.operands
        reads = operand_reads(function, val) if val.is_name else set()
        if ptr.is_name and function.memory_object(ptr.value) != ptr.value:
            reads.add(ptr.value)
        writes = {function.memory_object(ptr.value)} if ptr.is_name else set()
        return DataEffect(frozenset(reads), frozenset(writes))
    if op == "ret":
        reads = set()
        for o in instr.operands:
            reads |= operand_reads(function, o)
        writes = {return_key(function.name)} if instr.operands else set()
        return DataEffect(frozenset(reads), frozenset(writes))
    if op == "call":
        eff = effect_for(instr.callee or "", effects if effects is not None else DEFAULT_EFFECTS)
        reads: set[str] = set()
        writes: set[str] = set()
        for idx, arg in enumerate(instr.operands):
            if not arg.is_name:
                continue
            obj = function.memory_object(arg.value)
            if not arg.is_pointer:
                reads |= operand_reads(function, arg)
                continue
            if obj != arg.value:
                reads.add(arg.value)
            if eff.reads(idx):
                reads.add(obj)
            if eff.writes(idx):
                writes.add(obj)
        if instr.result:
            writes.add(instr.result)
        return DataEffect(frozenset(reads), frozenset(writes))
    reads = set()
    for o in instr.operands:
        reads |= operand_reads(function, o)
    writes = {instr.result} if instr.result else set()
    return DataEffect(frozenset(reads), frozenset(writes), instr.is_multi_valued)


# ---------------------------------------------------------------------------
# validation

def validate_module(module: Module) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    seen: set[str] = set()
    for name in [g.name for g in module.globals] + [e.name for e in module.externals] + [
            f.name for f in module.functions]:
        if name in seen:
            diags.append(Diagnostic(f"duplicate top-level name {name}"))
        seen.add(name)
    if not module.functions:
        diags.append(Diagnostic("module defines no function"))
    expected = 1
    for f in module.functions:
        for ins in f.instructions():
            if ins.id != expected:
                diags.append(Diagnostic(f"instruction numbering gap (expected {expected})", ins.id, f.name))
            expected = ins.id + 1
        diags.extend(_validate_function(module, f))
    return diags


def _validate_function(module: Module, f: Function) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def err(msg: str, instr: int | None = None) -> None:
        diags.append(Diagnostic(msg, instr, f.name))

    if not f.blocks:
        err("function has no blocks")
        return diags
    labels: set[str] = set()
    for b in f.blocks:
        if b.label in labels:
            err(f"duplicate block label {b.label}")
        labels.add(b.label)

    defined: set[str] = set()
    for p in f.params:
        if p.name in defined:
            err(f"duplicate parameter {p.name}")
        defined.add(p.name)
    for ins in f.instructions():
        if ins.result:
            if ins.result in defined:
                err(f"SSA violation: {ins.result} defined more than once", ins.id)
            defined.add(ins.result)

    preds: dict[str, list[str]] = {b.label: [] for b in f.blocks}
    for b in f.blocks:
        if not b.instructions:
            err(f"block {b.label} is empty")
            continue
        for ins in b.instructions[:-1]:
            if ins.is_terminator:
                err(f"terminator {ins.opcode} in the middle of block {b.label}", ins.id)
        if b.terminator is None:
            err(f"block {b.label} lacks a terminator", b.instructions[-1].id)
        for s in b.successors():
            if s not in labels:
                err(f"branch to unknown label {s}", b.instructions[-1].id)
            else:
                preds[s].append(b.label)

    for b in f.blocks:
        for ins in b.instructions:
            for op in ins.operands:
                if not op.is_name:
                    continue
                if op.value.startswith("%") and op.value not in defined:
                    err(f"use of undefined value {op.value}", ins.id)
                if op.value.startswith("@") and op.value not in module.global_names \
                        and op.value not in module.function_map:
                    err(f"use of unknown global {op.value}", ins.id)
            if ins.opcode == "phi":
                if sorted(ins.labels) != sorted(preds[b.label]):
                    err(f"phi incoming labels {list(ins.labels)} do not match predecessors "
                        f"{preds[b.label]}", ins.id)
            if ins.opcode == "store" and not ins.operands[1].is_name:
                err("store to a constant address", ins.id)
            if ins.opcode == "call":
                diags.extend(_validate_call(module, f, ins))
            if ins.opcode == "ret":
                if f.returns_value and not ins.operands:
                    err("ret without value in non-void function", ins.id)
                if not f.returns_value and ins.operands:
                    err("ret with value in void function", ins.id)
    if f.blocks[0].label in preds and preds[f.blocks[0].label]:
        err("entry block has predecessors")
    return diags


def _validate_call(module: Module, f: Function, ins: Instruction) -> list[Diagnostic]:
    diags = []
    callee = ins.callee or ""
    if callee in module.function_map:
        target = module.function_map[callee]
        if len(ins.operands) != len(target.params):
            diags.append(Diagnostic(
                f"arity mismatch calling {callee}: {len(ins.operands)} actuals for "
                f"{len(target.params)} formals", ins.id, f.name))
        pointer_objs = [f.memory_object(a.value) for a, p in zip(ins.operands, target.params)
                        if p.is_pointer and a.is_name]
        if len(pointer_objs) != len(set(pointer_objs)):
            diags.append(Diagnostic(f"same memory object passed twice to {callee}", ins.id, f.name))
        if ins.result and not target.returns_value:
            diags.append(Diagnostic(f"result of void function {callee} used", ins.id, f.name))
    elif callee in module.external_map:
        ext = module.external_map[callee]
        if not ext.variadic and not ins.elided and len(ins.operands) != ext.arity:
            diags.append(Diagnostic(
                f"arity mismatch calling {callee}: {len(ins.operands)} actuals for "
                f"{ext.arity} parameters", ins.id, f.name))
    else:
        diags.append(Diagnostic(f"unknown callee {callee}", ins.id, f.name))
    return diags
