"""Reader and printer for the textual mini-IR (".sir").

The syntax is a small LLVM-IR subset.  Parsing is token based, so text
pasted from a document or a listing works even when newlines were lost, and
an optional "N)" instruction-number prefix is skipped.  Attributes such
as ``nsw`` or ``, align 4`` are accepted and dropped.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .ir_model import (
    BINOPS, CASTS, CONSTANT_WORDS, BasicBlock, ExternalDecl, Function, GlobalDef, Instruction,
    Module, Operand, Param, SourceSpan,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>;[^\n]*)
  | (?P<ellipsis>\.\.\.)
  | (?P<name>[%@](?:[-a-zA-Z$._0-9]+|"[^"]*"))
  | (?P<meta>![-a-zA-Z$._0-9]*)
  | (?P<attrgroup>\#[0-9]+)
  | (?P<number>-?[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?)
  | (?P<word>[a-zA-Z_][a-zA-Z0-9_.]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<punct>[()\[\]{},=*:<>])
""", re.VERBOSE)

_INT_TYPE = re.compile(r"i[0-9]+$")
_BASE_TYPES = {"void", "label", "ptr", "float", "double", "half", "x86_fp80", "fp128", "metadata"}

_BINOP_FLAGS = {"nsw", "nuw", "exact", "fast", "nnan", "ninf", "nsz", "arcp", "contract", "afn",
                "reassoc", "disjoint"}
_CALL_ATTRS = {"tail", "musttail", "notail", "fastcc", "ccc", "coldcc", "nounwind", "noalias",
               "nocapture", "readonly", "readnone", "writeonly", "signext", "zeroext", "inreg",
               "noundef", "nonnull", "returned", "dso_local", "local_unnamed_addr", "align"}
_LINKAGE = {"private", "internal", "external", "weak", "common", "linkonce", "linkonce_odr",
            "weak_odr", "dso_local", "dso_preemptable", "unnamed_addr", "local_unnamed_addr",
            "hidden", "default", "protected", "extern_weak", "available_externally"}
_FN_ATTRS = {"nounwind", "uwtable", "noinline", "optnone", "readnone", "readonly", "norecurse",
             "alwaysinline", "ssp", "sspstrong", "local_unnamed_addr", "unnamed_addr"}
_PARAM_ATTRS = {"nocapture", "noalias", "readonly", "readnone", "writeonly", "signext", "zeroext",
                "inreg", "noundef", "nonnull", "returned", "byval", "sret"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.next_id = 1

    # -- token helpers -----------------------------------------------------
    def peek(self, offset: int = 0) -> _Tok | None:
        i = self.pos + offset
        return self.toks[i] if i < len(self.toks) else None

    def at(self, text: str, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.text == text

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            return ParseError(f"{msg} (at end of input)", last.line, last.col)
        return ParseError(f"{msg}, got {tok.text!r}", tok.line, tok.col)

    def take(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of input")
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.take()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def skip_words(self, words: set[str]) -> None:
        while True:
            t = self.peek()
            if t is None:
                return
            if t.kind == "word" and t.text in words:
                self.pos += 1
                if t.text == "align" and self.peek() and self.peek().kind == "number":
                    self.pos += 1
            elif t.kind == "attrgroup":
                self.pos += 1
            else:
                return

    def skip_trailing(self) -> None:
        # ", align 4" and ", !dbg !7" after an instruction
        while self.at(","):
            nxt = self.peek(1)
            if nxt is not None and nxt.text == "align":
                self.pos += 3
            elif nxt is not None and nxt.kind == "meta":
                self.pos += 3
            else:
                return

    # -- types and values --------------------------------------------------
    def parse_type(self) -> str:
        t = self.peek()
        if t is None:
            raise self.error("expected type")
        if t.text == "[":
            self.take()
            n = self.take()
            if n.kind != "number":
                raise self.error("expected array length", n)
            self.expect("x")
            inner = self.parse_type()
            self.expect("]")
            ty = f"[{n.text} x {inner}]"
        elif t.text == "{":
            self.take()
            parts = []
            if not self.at("}"):
                parts.append(self.parse_type())
                while self.accept(","):
                    parts.append(self.parse_type())
            self.expect("}")
            ty = "{" + ", ".join(parts) + "}"
        elif t.kind == "word" and (_INT_TYPE.match(t.text) or t.text in _BASE_TYPES):
            self.take()
            ty = t.text
        else:
            raise self.error("expected type")
        while self.at("*"):
            self.take()
            ty += "*"
        return ty

    def at_type(self) -> bool:
        t = self.peek()
        if t is None:
            return False
        if t.text in ("[", "{"):
            return True
        return t.kind == "word" and bool(_INT_TYPE.match(t.text) or t.text in _BASE_TYPES)

    def parse_value(self) -> str:
        t = self.take()
        if t.kind == "name":
            return t.text
        if t.kind == "number":
            return t.text
        if t.kind == "word" and t.text in CONSTANT_WORDS:
            return t.text
        raise self.error("expected value", t)

    def parse_typed(self) -> Operand:
        ty = self.parse_type()
        self.skip_words(_PARAM_ATTRS)
        return Operand(self.parse_value(), ty)

    def parse_label_ref(self) -> str:
        self.expect("label")
        t = self.take()
        if t.kind != "name" or not t.text.startswith("%"):
            raise self.error("expected label name", t)
        return t.text[1:]

    # -- top level ---------------------------------------------------------
    def parse_module(self, name: str) -> Module:
        if not self.toks:
            raise ParseError("empty input: a module needs at least one function", 1, 1)
        globals_: list[GlobalDef] = []
        externals: list[ExternalDecl] = []
        functions: list[Function] = []
        while self.peek() is not None:
            t = self.peek()
            if t.text == "define":
                functions.append(self.parse_define())
            elif t.text == "declare":
                externals.append(self.parse_declare())
            elif t.kind == "name" and t.text.startswith("@") and self.at("=", 1):
                globals_.append(self.parse_global())
            else:
                raise self.error("expected 'define', 'declare' or a global definition")
        if not functions:
            raise ParseError("module defines no function", 1, 1)
        return Module(name, tuple(globals_), tuple(externals), tuple(functions))

    def parse_global(self) -> GlobalDef:
        gname = self.take().text
        self.expect("=")
        self.skip_words(_LINKAGE)
        kind = self.take()
        if kind.text not in ("global", "constant"):
            raise self.error("expected 'global' or 'constant'", kind)
        ty = self.parse_type()
        init = "zeroinitializer"
        t = self.peek()
        if t is not None and (t.kind in ("number", "name", "string") or t.text in CONSTANT_WORDS):
            init = self.take().text
        elif t is not None and t.text == "c" and self.peek(1) and self.peek(1).kind == "string":
            self.take()
            init = "c" + self.take().text
        self.skip_trailing()
        return GlobalDef(gname, ty, init, kind.text == "constant")

    def parse_declare(self) -> ExternalDecl:
        self.expect("declare")
        self.skip_words(_LINKAGE | _PARAM_ATTRS)
        ret = self.parse_type()
        fname = self.take()
        if fname.kind != "name" or not fname.text.startswith("@"):
            raise self.error("expected function name", fname)
        self.expect("(")
        types: list[str] = []
        variadic = False
        while not self.at(")"):
            if self.accept("..."):
                variadic = True
            else:
                types.append(self.parse_type())
                self.skip_words(_PARAM_ATTRS)
                t = self.peek()
                if t is not None and t.kind == "name" and t.text.startswith("%"):
                    self.take()
            if not self.accept(","):
                break
        self.expect(")")
        self.skip_words(_FN_ATTRS)
        return ExternalDecl(fname.text, ret, tuple(types), variadic)

    def parse_define(self) -> Function:
        self.expect("define")
        self.skip_words(_LINKAGE | _PARAM_ATTRS)
        ret = self.parse_type()
        fname = self.take()
        if fname.kind != "name" or not fname.text.startswith("@"):
            raise self.error("expected function name", fname)
        self.expect("(")
        params: list[Param] = []
        while not self.at(")"):
            ty = self.parse_type()
            self.skip_words(_PARAM_ATTRS)
            pname = self.take()
            if pname.kind != "name" or not pname.text.startswith("%"):
                raise self.error("expected parameter name", pname)
            params.append(Param(pname.text, ty))
            if not self.accept(","):
                break
        self.expect(")")
        self.skip_words(_FN_ATTRS)
        open_brace = self.expect("{")
        blocks = self.parse_body(open_brace)
        return Function(fname.text, ret, tuple(params), tuple(blocks))

    def parse_body(self, open_brace: _Tok) -> list[BasicBlock]:
        blocks: list[BasicBlock] = []
        label: str | None = None
        current: list[Instruction] = []
        while True:
            t = self.peek()
            if t is None:
                raise ParseError("unbalanced braces: function body not closed",
                                 open_brace.line, open_brace.col)
            if t.text == "}":
                self.take()
                break
            if t.kind == "number" and self.at(")", 1):
                self.pos += 2
                continue
            if t.kind in ("word", "number") and self.at(":", 1) and not (
                    t.kind == "word" and t.text in ("label",)):
                if label is not None or current:
                    blocks.append(BasicBlock(label or "entry", tuple(current)))
                label, current = t.text, []
                self.pos += 2
                continue
            if t.text == "define" or t.text == "declare":
                raise ParseError("unbalanced braces: function body not closed",
                                 open_brace.line, open_brace.col)
            current.append(self.parse_instruction())
        if label is not None or current:
            blocks.append(BasicBlock(label or "entry", tuple(current)))
        return blocks

    # -- instructions ------------------------------------------------------
    def parse_instruction(self) -> Instruction:
        start = self.peek()
        result = None
        if start.kind == "name" and start.text.startswith("%") and self.at("=", 1):
            result = start.text
            self.pos += 2
        elif start.kind == "name":
            raise self.error("malformed instruction", start)
        self.skip_words({"tail", "musttail", "notail"})
        op_tok = self.take()
        if op_tok.kind != "word":
            raise self.error("expected opcode", op_tok)
        op = op_tok.text
        span = SourceSpan(start.line, start.col)
        ident = self.next_id
        kw = dict(id=ident, result=result, span=span)
        if op == "alloca":
            ty = self.parse_type()
            operands = ()
            if self.at(",") and not self.at("align", 1):
                self.take()
                operands = (self.parse_typed(),)
            ins = Instruction(opcode="alloca", type=ty, operands=operands, **kw)
        elif op == "load":
            self.skip_words({"volatile", "atomic"})
            first = self.parse_type()
            if self.accept(","):
                ins = Instruction(opcode="load", type=first, operands=(self.parse_typed(),), **kw)
            else:
                ins = Instruction(opcode="load", operands=(Operand(self.parse_value(), first),), **kw)
        elif op == "store":
            self.skip_words({"volatile", "atomic"})
            val = self.parse_typed()
            self.expect(",")
            ptr = self.parse_typed()
            ins = Instruction(opcode="store", operands=(val, ptr), **kw)
        elif op in BINOPS:
            self.skip_words(_BINOP_FLAGS)
            ty = self.parse_type()
            a = self.parse_value()
            self.expect(",")
            b = self.parse_value()
            ins = Instruction(opcode=op, type=ty, operands=(Operand(a), Operand(b)), **kw)
        elif op in ("icmp", "fcmp"):
            self.skip_words(_BINOP_FLAGS)
            pred = self.take()
            if pred.kind != "word":
                raise self.error("expected comparison predicate", pred)
            ty = self.parse_type()
            a = self.parse_value()
            self.expect(",")
            b = self.parse_value()
            ins = Instruction(opcode=op, type=ty, predicate=pred.text,
                              operands=(Operand(a), Operand(b)), **kw)
        elif op == "phi":
            ins = self.parse_phi(kw)
        elif op == "select":
            ops = [self.parse_typed()]
            for _ in range(2):
                self.expect(",")
                ops.append(self.parse_typed())
            ins = Instruction(opcode="select", operands=tuple(ops), **kw)
        elif op == "br":
            if self.at("label"):
                ins = Instruction(opcode="br", labels=(self.parse_label_ref(),), **kw)
            else:
                cond = self.parse_typed()
                self.expect(",")
                t = self.parse_label_ref()
                self.expect(",")
                f = self.parse_label_ref()
                ins = Instruction(opcode="br", operands=(cond,), labels=(t, f), **kw)
        elif op == "switch":
            val = self.parse_typed()
            self.expect(",")
            labels = [self.parse_label_ref()]
            ops = [val]
            self.expect("[")
            while not self.at("]"):
                ops.append(self.parse_typed())
                self.expect(",")
                labels.append(self.parse_label_ref())
                self.accept(",")
            self.expect("]")
            ins = Instruction(opcode="switch", operands=tuple(ops), labels=tuple(labels), **kw)
        elif op == "ret":
            if self.accept("void"):
                ins = Instruction(opcode="ret", type="void", **kw)
            else:
                ty = self.parse_type()
                ins = Instruction(opcode="ret", type=ty, operands=(Operand(self.parse_value()),), **kw)
        elif op == "call":
            ins = self.parse_call(kw)
        elif op == "getelementptr":
            self.skip_words({"inbounds"})
            first = self.parse_type()
            if self.accept(","):
                ops = [self.parse_typed()]
                src_ty = first
            else:
                ops = [Operand(self.parse_value(), first)]
                src_ty = None
            while self.at(",") and not self.at("align", 1) and not (
                    self.peek(1) is not None and self.peek(1).kind == "meta"):
                self.take()
                self.skip_words({"inrange"})
                ops.append(self.parse_typed())
            ins = Instruction(opcode="getelementptr", type=src_ty, operands=tuple(ops), **kw)
        elif op in CASTS:
            val = self.parse_typed()
            self.expect("to")
            ins = Instruction(opcode=op, type=self.parse_type(), operands=(val,), **kw)
        elif op == "unreachable":
            ins = Instruction(opcode="unreachable", **kw)
        else:
            raise ParseError(f"unknown opcode {op!r}", op_tok.line, op_tok.col)
        self.skip_trailing()
        self.next_id += 1
        return ins

    def parse_phi(self, kw) -> Instruction:
        ty = self.parse_type()
        wrapped = self.at("[") and self.at("[", 1)
        if wrapped:
            self.take()
        values, labels = [], []
        while True:
            self.expect("[")
            values.append(Operand(self.parse_value()))
            self.expect(",")
            lab = self.take()
            if lab.kind != "name" or not lab.text.startswith("%"):
                raise self.error("expected predecessor label", lab)
            labels.append(lab.text[1:])
            self.expect("]")
            if not (self.at(",") and self.at("[", 1)):
                break
            self.take()
        if wrapped:
            self.expect("]")
        return Instruction(opcode="phi", type=ty, operands=tuple(values), labels=tuple(labels), **kw)

    def parse_call(self, kw) -> Instruction:
        self.skip_words(_CALL_ATTRS)
        ret = self.parse_type()
        if self.at("("):
            # explicit function type, e.g. "i32 (i8*, ...)"
            depth = 0
            while True:
                t = self.take()
                depth += t.text == "("
                depth -= t.text == ")"
                if depth == 0:
                    break
            while self.accept("*"):
                pass
        callee = self.take()
        if callee.kind != "name" or not callee.text.startswith("@"):
            raise self.error("expected direct callee name (indirect calls are not supported)", callee)
        self.expect("(")
        args: list[Operand] = []
        elided = False
        while not self.at(")"):
            if self.accept("..."):
                elided = True
            else:
                args.append(self.parse_typed())
            if not self.accept(","):
                break
        self.expect(")")
        self.skip_words(_FN_ATTRS)
        return Instruction(opcode="call", type=ret, callee=callee.text, operands=tuple(args),
                           elided=elided, **kw)


def parse_module(text: str, name: str = "module") -> Module:
    """Parse mini-IR text; raises ParseError on malformed input."""
    return _Parser(text).parse_module(name)


# ---------------------------------------------------------------------------
# printing

def _typed(op: Operand) -> str:
    return f"{op.type} {op.value}" if op.type else op.value


def format_instruction(ins: Instruction) -> str:
    op = ins.opcode
    lhs = f"{ins.result} = " if ins.result else ""
    if op == "alloca":
        body = f"alloca {ins.type}" + "".join(f", {_typed(o)}" for o in ins.operands)
    elif op == "load":
        ptr = ins.operands[0]
        body = f"load {ins.type}, {_typed(ptr)}" if ins.type else f"load {_typed(ptr)}"
    elif op == "store":
        body = f"store {_typed(ins.operands[0])}, {_typed(ins.operands[1])}"
    elif op in BINOPS:
        body = f"{op} {ins.type} {ins.operands[0].value}, {ins.operands[1].value}"
    elif op in ("icmp", "fcmp"):
        body = f"{op} {ins.predicate} {ins.type} {ins.operands[0].value}, {ins.operands[1].value}"
    elif op == "phi":
        pairs = ", ".join(f"[{v.value}, %{lab}]" for v, lab in zip(ins.operands, ins.labels))
        body = f"phi {ins.type} {pairs}"
    elif op == "select":
        body = "select " + ", ".join(_typed(o) for o in ins.operands)
    elif op == "br":
        if ins.operands:
            body = (f"br {_typed(ins.operands[0])}, label %{ins.labels[0]}, "
                    f"label %{ins.labels[1]}")
        else:
            body = f"br label %{ins.labels[0]}"
    elif op == "switch":
        cases = " ".join(f"{_typed(v)}, label %{lab}"
                         for v, lab in zip(ins.operands[1:], ins.labels[1:]))
        body = f"switch {_typed(ins.operands[0])}, label %{ins.labels[0]} [{cases}]"
    elif op == "ret":
        body = f"ret {ins.type} {ins.operands[0].value}" if ins.operands else "ret void"
    elif op == "call":
        args = [_typed(a) for a in ins.operands]
        if ins.elided:
            args.insert(0, "...")
        body = f"call {ins.type} {ins.callee}({', '.join(args)})"
    elif op == "getelementptr":
        ops = ", ".join(_typed(o) for o in ins.operands)
        body = f"getelementptr {ins.type}, {ops}" if ins.type else f"getelementptr {ops}"
    elif op in CASTS:
        body = f"{op} {_typed(ins.operands[0])} to {ins.type}"
    else:
        body = op
    return lhs + body


def print_module(module: Module, numbered: bool = False) -> str:
    """Canonical text of a module; ``numbered`` prefixes each instruction
    with its id in "N)" form, which the parser skips."""
    out: list[str] = []
    for e in module.externals:
        params = list(e.param_types) + (["..."] if e.variadic else [])
        out.append(f"declare {e.return_type} {e.name}({', '.join(params)})")
    if module.externals:
        out.append("")
    for g in module.globals:
        kind = "constant" if g.constant else "global"
        out.append(f"{g.name} = {kind} {g.type} {g.initializer}")
    if module.globals:
        out.append("")
    for f in module.functions:
        params = ", ".join(f"{p.type} {p.name}" for p in f.params)
        out.append(f"define {f.return_type} {f.name}({params}) {{")
        for b in f.blocks:
            out.append(f"{b.label}:")
            for ins in b.instructions:
                prefix = f"{ins.id}) " if numbered else ""
                out.append(f"  {prefix}{format_instruction(ins)}")
        out.append("}")
        out.append("")
    return "\n".join(out).rstrip("\n") + "\n"
