from __future__ import annotations

import os
from pathlib import Path

import pytest

from wyvc.errors import LemmaRefuted
from wyvc.semantics import ContractViolation, eval_method
from wyvc.smt import (
    SolverConfig, check_obligation, check_validity, confirms_counterexample, dump_script,
    emit_formula, emit_smtlib, parse_model, validate_library,
)
from wyvc.speclib import DEFAULT_LIBRARY, EMPTY_LIBRARY, Lemma, SpecLibraryConfig
from wyvc.syntax import Type, parse_formula
from wyvc.vcgen import generate_obligations

from conftest import load, needs_solver

GOLDEN = Path(__file__).parent / "golden"


def _ob(method, name):
    return next(ob for ob in generate_obligations(method) if ob.name == name)


def test_script_is_self_contained_and_deterministic(sum_method):
    ob = _ob(sum_method, "h.loop")
    a, b = emit_smtlib(ob), emit_smtlib(ob)
    assert a == b and a.text == b.text
    assert a.text == (GOLDEN / "sum_h_loop.smt2").read_text()
    assert "(include" not in a.text and a.text.rstrip().endswith("(check-sat)")
    assert "define-fun-rec sumFrom" in a.recursive_text
    assert "; lemma sum_take_succ" in a.text


def test_disabled_lemma_leaves_script(sum_method):
    script = emit_smtlib(_ob(sum_method, "h.loop"), DEFAULT_LIBRARY.without("sum_take_succ"))
    assert "sum_take_succ" not in script.text


def test_dump_writes_text(tmp_path, sum_method):
    script = emit_smtlib(_ob(sum_method, "h.entry"))
    path = dump_script(script, str(tmp_path))
    assert Path(path).read_text() == script.text and path.endswith(".smt2")


def test_parse_model_arrays_and_ints():
    text = """(
  (define-fun u_x () Int (- 3))
  (define-fun len_xs () Int 2)
  (define-fun u_xs () (Array Int Int) (store ((as const (Array Int Int)) 0) 1 5))
)"""
    model = parse_model(text, [("x", Type.INT), ("xs", Type.ARRAY)])
    assert model.values == {"x": -3, "xs": (0, 5)}


@needs_solver
def test_linear_goal_valid():
    v = check_validity(emit_formula("lin", parse_formula("forall x :: x + 1 = 5 ==> x = 4")), 10_000)
    assert v.kind == "Valid"


@needs_solver
def test_trivially_true_goal_valid():
    assert check_validity(emit_formula("t", parse_formula("true"))).kind == "Valid"


@needs_solver
def test_false_goal_invalid():
    v = check_validity(emit_formula("f", parse_formula("forall x :: x > 0")))
    assert v.kind == "Invalid" and v.model.values["x"] <= 0


@needs_solver
def test_sum_obligations_all_valid(sum_method):
    kinds = {ob.name: check_obligation(ob, timeout_ms=10_000).kind for ob in generate_obligations(sum_method)}
    assert set(kinds.values()) == {"Valid"}, kinds
    assert len(kinds) == 6


@needs_solver
def test_prefix_lemma_is_what_proves_the_loop(sum_method):
    ob = _ob(sum_method, "h.loop")
    assert check_obligation(ob, DEFAULT_LIBRARY, timeout_ms=10_000).kind == "Valid"
    without = check_obligation(ob, DEFAULT_LIBRARY.without("sum_take_succ"), timeout_ms=3_000)
    assert without.kind in ("Timeout", "Unknown")


@needs_solver
def test_subtracting_sum_gives_replayable_model():
    prog = load("mutants/sum_minus.wyv")
    ob = _ob(prog.main, "h.loop")
    v = check_obligation(ob, timeout_ms=10_000)
    assert v.kind == "Invalid"
    assert confirms_counterexample(ob, v.model) is True
    xs = v.model.values["xs"]
    assert len(xs) <= 4 and any(x != 0 for x in xs)
    out = eval_method(prog.main, [xs]).outcome
    assert isinstance(out, ContractViolation)


def _solver_children() -> list[int]:
    me = os.getpid()
    out = []
    for pid in os.listdir("/proc"):
        if not pid.isdigit():
            continue
        try:
            with open(f"/proc/{pid}/stat") as fh:
                fields = fh.read().rsplit(")", 1)[1].split()
        except OSError:
            continue
        if int(fields[1]) == me and fields[0] != "Z":
            out.append(int(pid))
    return out


@needs_solver
@pytest.mark.skipif(not os.path.isdir("/proc"), reason="needs /proc")
def test_one_millisecond_timeout_leaves_no_process(sum_method):
    hard = parse_formula("forall a, b, c :: a > 0 && b > 0 && c > 0 ==> a * a * a + b * b * b != c * c * c")
    v = check_validity(emit_formula("fermat3", hard), timeout_ms=1)
    assert v.kind == "Timeout"
    v2 = check_obligation(_ob(sum_method, "h.loop"), DEFAULT_LIBRARY.without("sum_take_succ"), timeout_ms=200)
    assert v2.kind == "Timeout"
    assert _solver_children() == []


def test_missing_solver_is_reported(monkeypatch):
    from wyvc.errors import WyvError

    monkeypatch.delenv("WYVC_SOLVER", raising=False)
    monkeypatch.setenv("PATH", "/nonexistent")
    with pytest.raises(WyvError):
        SolverConfig().executable()


@needs_solver
def test_solver_error_on_garbage_binary(tmp_path):
    fake = tmp_path / "fake-solver"
    fake.write_text("#!/bin/sh\necho oops >&2\nexit 3\n")
    fake.chmod(0o755)
    v = check_validity(emit_formula("t", parse_formula("true")), 2000, SolverConfig(str(fake)))
    assert v.kind == "SolverError"


def test_shipped_library_validates():
    rep = validate_library()
    names = [n for n, _ in rep.checked]
    assert "sum_take_succ" in names and len(names) == len(DEFAULT_LIBRARY.enabled)
    assert all(cases > 0 for _, cases in rep.checked)


def test_wrong_lemma_refuted():
    bad = SpecLibraryConfig(lemmas=(Lemma("sum_nonneg", "forall xs: Array Int, sum(xs) >= 0"),))
    with pytest.raises(LemmaRefuted) as err:
        validate_library(bad)
    assert err.value.name == "sum_nonneg"
    assert err.value.counterexample == {"xs": [-1]}


def test_empty_library_report():
    rep = validate_library(EMPTY_LIBRARY)
    assert rep.ok and rep.checked == [] and rep.to_json() == {"lemmas": []}
