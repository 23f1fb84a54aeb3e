from __future__ import annotations

import json

import pytest

from conftest import corpus_names, corpus_text
from symslice.ir_model import (
    EffectsError, data_effect, def_set, frame_key, load_effects, number_instructions,
    qualify, ref_set, return_key, split_key, validate_module,
)
from symslice.ir_parser import ParseError, parse_module, print_module


def test_fig8_shape(fig8):
    assert [f.name for f in fig8.functions] == ["@main", "@A", "@add", "@inc"]
    assert fig8.size == 32
    assert [i.id for i in fig8.function("@add").instructions()] == [24, 25, 26, 27, 28]
    assert validate_module(fig8) == []


def test_ref_def_sets(fig8):
    ins = number_instructions(fig8)
    assert ref_set(ins[3]) == set()
    assert ref_set(ins[26]) == {"%1", "%2"}
    assert def_set(ins[27]) == {"%a"}
    assert def_set(ins[24]) == {"%1"}
    assert def_set(ins[8]) == set()
    assert ref_set(ins[20]) == set()  # ret i32 0


def test_numbering_is_dense(fig8):
    table = number_instructions(fig8)
    assert sorted(table) == list(range(1, 33))


def test_one_ret_module():
    m = parse_module("define void @f() {\nentry:\n  ret void\n}\n")
    assert {k: v.opcode for k, v in number_instructions(m).items()} == {1: "ret"}
    body = print_module(m).splitlines()
    assert body[1:3] == ["entry:", "  ret void"]


@pytest.mark.parametrize("name", corpus_names())
def test_round_trip(name):
    m = parse_module(corpus_text(name))
    text = print_module(m)
    again = parse_module(text)
    assert print_module(again) == text
    assert again.functions == m.functions
    assert validate_module(m) == []


def test_printed_store(fig8):
    assert "store i32 %3, i32* %a" in print_module(fig8)


def test_spans_increase(fig8):
    lines = [i.span.line for f in fig8.functions for i in f.instructions()]
    assert all(a < b for a, b in zip(lines, lines[1:]))


def test_empty_input_is_error():
    with pytest.raises(ParseError):
        parse_module("")


def test_unbalanced_brace():
    with pytest.raises(ParseError) as exc:
        parse_module("define void @f() {\nentry:\n  ret void\n")
    assert exc.value.line >= 1


def test_unknown_opcode():
    with pytest.raises(ParseError):
        parse_module("define void @f() {\nentry:\n  %x = frobnicate i32 1\n  ret void\n}\n")


def test_missing_terminator_diagnostic():
    m = parse_module("define i32 @f() {\nentry:\n  %x = add i32 1, 2\n}\n")
    diags = validate_module(m)
    assert len(diags) == 1


def test_double_definition_diagnostic():
    m = parse_module("define i32 @f() {\nentry:\n  %x = add i32 1, 2\n"
                     "  %x = add i32 3, 4\n  ret i32 %x\n}\n")
    assert any("%x" in str(d) for d in validate_module(m))


def test_keys():
    assert qualify("@f", "%x") == "@f:%x"
    assert qualify("@f", "@g") == "@g"
    assert frame_key("@f", "@g") == "@f:@g"
    assert return_key("@f") == "@f:@f"
    assert split_key("@f:%x") == ("@f", "%x")
    assert split_key("@g") == (None, "@g")


def test_default_effects(fig8):
    main = fig8.function("@main")
    ins = number_instructions(fig8)
    scanf = data_effect(main, ins[5])
    assert scanf.writes == {"%n", "%2"}
    printf = data_effect(main, ins[17])
    assert printf.reads == {"%6"} and printf.writes == {"%7"}


def test_memcpy_effect():
    m = parse_module(corpus_text("memcpy.sir"))
    f = m.functions[0]
    cp = next(i for i in f.instructions() if i.callee == "@memcpy")
    eff = data_effect(f, cp)
    assert "%dst" in eff.writes and "%src" in eff.reads and "%dst" not in eff.reads


def test_effects_file(tmp_path, monkeypatch):
    path = tmp_path / "fx.json"
    path.write_text(json.dumps({"sink": {"reads": [0]}, "fill": {"writes": [0]}}))
    table = load_effects(path)
    assert table["@fill"].writes(0) and not table["@fill"].reads(0)
    monkeypatch.setenv("SYMSLICE_EFFECTS", str(path))
    assert "@sink" in load_effects()
    path.write_text("[1, 2]")
    with pytest.raises(EffectsError):
        load_effects(path)


def test_gep_aliases_base():
    m = parse_module(corpus_text("select_gep.sir"))
    f = m.functions[0]
    assert f.memory_object("%p") == "%arr"
