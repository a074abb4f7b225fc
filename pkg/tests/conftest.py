from __future__ import annotations

import os
import shutil
from pathlib import Path

import pytest

from wyvc.syntax import parse_program

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"

HAVE_SOLVER = bool(os.environ.get("WYVC_SOLVER") or shutil.which("z3") or shutil.which("cvc5"))
needs_solver = pytest.mark.skipif(not HAVE_SOLVER, reason="no SMT solver on PATH")


def load(rel: str):
    return parse_program((CORPUS / rel).read_text())


def corpus_files(category: str) -> list[Path]:
    return sorted((CORPUS / category).glob("*.wyv"))


@pytest.fixture
def sum_program():
    return load("valid/sum.wyv")


@pytest.fixture
def sum_method(sum_program):
    return sum_program.main


@pytest.fixture
def weak_sum():
    return load("scenarios/sum_weak.wyv")
