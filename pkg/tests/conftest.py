from __future__ import annotations

from importlib.resources import files

import pytest

from symslice.ir_parser import parse_module

CORPUS = files("symslice").joinpath("corpus")


def corpus_text(name: str) -> str:
    return CORPUS.joinpath(name).read_text(encoding="utf-8")


def corpus_names() -> list[str]:
    return sorted(p.name for p in CORPUS.iterdir() if p.name.endswith(".sir"))


def corpus_path(name: str) -> str:
    return str(CORPUS.joinpath(name))


@pytest.fixture
def fig8():
    return parse_module(corpus_text("fig8.sir"), name="fig8")


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
