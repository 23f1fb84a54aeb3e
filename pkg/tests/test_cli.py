from __future__ import annotations

import json
import subprocess
import sys

import pytest

from conftest import corpus_path
from symslice.cli import main, summaries_data
from symslice.ir_model import validate_module
from symslice.ir_parser import parse_module
from symslice.slicer import inter_slice

FIG8 = corpus_path("fig8.sir")


def run(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def test_slice_backward(capsys):
    code, out, _ = run(capsys, "slice", "--criterion", "@inc:%z", FIG8)
    assert code == 0
    assert out.split() == [str(i) for i in (5, 7, 9, 10, 11, 12, 13, 14, 22, 24, 25, 26, 27,
                                            30, 31)]


def test_slice_forward(capsys):
    code, out, _ = run(capsys, "slice", "--criterion", "@main:%n", "--direction", "forward",
                       FIG8)
    assert code == 0
    assert {int(x) for x in out.split()} == set(range(1, 33)) - {1, 2, 3, 4, 6, 7, 8}


def test_criterion_forms(capsys):
    outs = {run(capsys, "slice", "--criterion", c, FIG8)[1]
            for c in ("@inc:%z", "@inc %z", "inc:%z", "%z")}
    assert len(outs) == 1


def test_slice_json_and_listing(capsys):
    code, out, _ = run(capsys, "slice", "--criterion", "%tmp", "--format", "json", FIG8)
    assert code == 0 and json.loads(out)["criterion"] == ["@inc", "%tmp"]
    code, out, _ = run(capsys, "slice", "--criterion", "%z", "--listing", "strike", FIG8)
    assert "; x 21)" in out and "; x 6)" in out


def test_unknown_variable_exit_1(capsys):
    code, _, err = run(capsys, "slice", "--criterion", "@main:%nope", FIG8)
    assert code == 1 and "%nope" in err


def test_usage_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "slice", FIG8)[0] == 2  # missing --criterion
    assert run(capsys, "slice", "--criterion", "%3", FIG8)[0] == 2  # defined in several
    assert run(capsys, "slice", "--criterion", "@main:n", FIG8)[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "gen")[0] == 2
    assert run(capsys, "idt", str(tmp_path / "missing.sir"))[0] == 2


def test_bad_input_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.sir"
    bad.write_text("define void @f( {\n")
    code, _, err = run(capsys, "idt", str(bad))
    assert code == 1 and "parse error" in err


def test_idt_command(capsys):
    code, out, _ = run(capsys, "idt", FIG8)
    assert code == 0
    rows = out.splitlines()
    assert len(rows) == 33 and rows[19].split(",")[21] == "0"


def test_idt_single_cell(capsys, tmp_path):
    one = tmp_path / "one.sir"
    one.write_text("define void @f() {\nentry:\n  ret void\n}\n")
    assert run(capsys, "idt", str(one))[1] == "i,1\n1,1\n"


def test_summaries_command(capsys):
    code, out, _ = run(capsys, "summaries", "--format", "json", FIG8)
    assert code == 0
    data = json.loads(out)
    legend = {e["id"]: e["name"] for e in data["legend"]}
    ty = data["procedures"]["@A"]["T"]["%y"]
    concrete = sorted(e for e in ty if e > 0)
    symbolic = [legend[e] for e in ty if e < 0]
    assert concrete == [22, 24, 25, 26, 27, 30, 31] and symbolic == ["@A:%y"]
    assert data["procedures"]["@add"]["gmod"] == ["%a"]
    assert data["procedures"]["@add"]["gref"] == ["%a", "%b"]
    assert data == summaries_data(inter_slice(parse_module(open(FIG8).read())))


def test_summaries_text(capsys):
    code, out, _ = run(capsys, "summaries", FIG8)
    assert code == 0 and "SUMM(%a) = {%a, %b}" in out and "legend" in out


def test_compare_sdg(capsys):
    code, out, _ = run(capsys, "compare", FIG8)
    assert code == 0 and out.splitlines()[-1] == "all equal"


def test_compare_weiser(capsys):
    code, out, _ = run(capsys, "compare", "--oracle", "weiser", FIG8)
    assert code == 0
    assert "weiser-only {6 21}" in out


def test_compare_pdg_closure(capsys):
    code, out, _ = run(capsys, "compare", "--oracle", "pdg-closure", FIG8)
    assert code == 0 and "@add:27 equal" in out


def test_compare_no_criteria(capsys, tmp_path):
    one = tmp_path / "one.sir"
    one.write_text("define void @f() {\nentry:\n  ret void\n}\n")
    code, out, _ = run(capsys, "compare", str(one))
    assert code == 0 and out == "all equal\n"


def test_gen_command(capsys, tmp_path):
    code, first, _ = run(capsys, "gen", "--seed", "1")
    assert code == 0 and validate_module(parse_module(first)) == []
    assert run(capsys, "gen", "--seed", "1")[1] == first
    out = tmp_path / "m.sir"
    assert run(capsys, "gen", "--seed", "4", "--max-procs", "2", "--max-instrs", "60",
               "--out", str(out))[0] == 0
    m = parse_module(out.read_text())
    assert len(m.functions) <= 2 and m.size <= 60


def test_stats_command(capsys):
    code, out, _ = run(capsys, "stats", FIG8)
    assert code == 0 and "@main:%sum" in out and "53.12%" in out
    code, csv_out, _ = run(capsys, "stats", "--format", "csv", FIG8)
    assert "@main:%sum,17,32,0.531250" in csv_out


def test_dot_command(capsys):
    code, out, _ = run(capsys, "dot", "--graph", "sdg", FIG8)
    assert code == 0 and out.startswith('digraph "sdg"')
    assert run(capsys, "dot", "--graph", "cfg", "--function", "@nope", FIG8)[0] == 2


def test_effects_flag(capsys, tmp_path):
    fx = tmp_path / "fx.json"
    fx.write_text(json.dumps({"scanf": {}}))  # scanf no longer writes %n
    code, out, _ = run(capsys, "slice", "--criterion", "@main:%n", "--effects", str(fx), FIG8)
    assert code == 0 and out.strip() == "1"  # only the allocation remains
    fx.write_text("not json")
    assert run(capsys, "slice", "--criterion", "%n", "--effects", str(fx), FIG8)[0] == 1


def test_effects_env(capsys, tmp_path, monkeypatch):
    fx = tmp_path / "fx.json"
    fx.write_text(json.dumps({"scanf": {}}))
    monkeypatch.setenv("SYMSLICE_EFFECTS", str(fx))
    assert run(capsys, "slice", "--criterion", "%n", FIG8)[1].strip() == "1"


@pytest.mark.parametrize("args", [["idt", FIG8], ["stats", FIG8], ["compare", FIG8]])
def test_deterministic_subprocess(args):
    cmd = [sys.executable, "-m", "symslice.cli", *args]
    a = subprocess.run(cmd, capture_output=True, text=True)
    b = subprocess.run(cmd, capture_output=True, text=True)
    assert a.returncode == b.returncode == 0 and a.stdout == b.stdout
