from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wyvc.analysis import (
    DisproofDomain, bounded_disprove, check_imperativeness, make_disproof_goal, replay_disproof,
)
from wyvc.semantics import eval_formula
from wyvc.syntax import parse_formula, parse_method, pretty_print
from wyvc.syntax.ast import Assert, GhostAssign, Seq, VarDecl, While

from conftest import CORPUS, corpus_files, load, needs_solver

CONTRADICTION = "method c (x: Int) returns (r: Int) ensures r < 0 && r > 0 do return 0"
NO_ROOT = "method s (x: Int) returns (r: Int) requires x = 2 ensures r * r = x do return 1"
NOTHING = "method f (x: Int) returns (r: Int) requires false ensures r = 0 do return 0"


def test_claim_shape():
    goal = make_disproof_goal(parse_method(CONTRADICTION))
    assert goal.pre == parse_formula("true")
    # the empty precondition conjunct is folded away
    assert goal.claim == parse_formula("exists x :: forall r :: !(r < 0 && r > 0)")


def test_claim_needs_ensures():
    with pytest.raises(ValueError):
        make_disproof_goal(parse_method("method f (x: Int) returns (r: Int) do return x"))


@needs_solver
def test_contradiction_disproved_and_replays():
    goal = make_disproof_goal(parse_method(CONTRADICTION))
    res = bounded_disprove(goal)
    assert res.disproved and res.witness == {"x": 0}
    assert "(check-sat)" in res.transcript
    assert replay_disproof(goal, res)


@needs_solver
def test_square_root_of_two_disproved():
    goal = make_disproof_goal(parse_method(NO_ROOT))
    res = bounded_disprove(goal)
    assert res.disproved and res.witness == {"x": 2}
    assert eval_formula(goal.pre, res.witness)
    # the oracle: no small r squares to 2
    assert all(r * r != 2 for r in range(-2, 3))
    assert replay_disproof(goal, res)


@needs_solver
def test_sum_inconclusive(sum_method):
    res = bounded_disprove(make_disproof_goal(sum_method))
    assert res.status == "Inconclusive" and res.candidates == DisproofDomain().max_candidates


def test_false_precondition_has_no_candidates():
    res = bounded_disprove(make_disproof_goal(parse_method(NOTHING)))
    assert res.status == "Inconclusive" and res.candidates == 0


def test_inconclusive_result_does_not_replay(sum_method):
    from wyvc.analysis import DisproofResult

    assert not replay_disproof(make_disproof_goal(sum_method), DisproofResult("Inconclusive"))


# ---- judge

def test_listing_three_pattern_flagged():
    v = check_imperativeness(load("leaky/sum_direct.wyv").main)
    assert not v.imperative and "R1" in v.rules
    assert v.to_json()["violations"][0]["excerpt"] == "sum(xs)"


def test_loop_version_passes(sum_method):
    assert check_imperativeness(sum_method).imperative


@pytest.mark.parametrize("path", corpus_files("valid"), ids=lambda p: p.name)
def test_valid_corpus_is_imperative(path):
    for m in load(f"valid/{path.name}").methods:
        assert check_imperativeness(m).imperative, m.name


@pytest.mark.parametrize("path", corpus_files("leaky"), ids=lambda p: p.name)
def test_leaky_corpus_matches_labels(path):
    label = json.loads((CORPUS / "leaky/labels.json").read_text())[path.name]
    v = check_imperativeness(load(f"leaky/{path.name}").main)
    assert v.imperative == label["imperative"]
    assert sorted(v.rules) == label["rules"]


def test_array_comparison_is_r3():
    m = parse_method("method e (a: Array Int, b: Array Int) returns (r: Bool) do return a = b")
    assert {"R2", "R3"} <= check_imperativeness(m).rules


def _add_ghost(m, formula_src: str, ghost_name: str):
    """Prepend a ghost declaration and an assert; add an invariant to every loop."""
    extra = parse_formula(formula_src)

    def loops(s):
        if isinstance(s, Seq):
            return Seq(tuple(loops(c) for c in s.stmts), s.span)
        if isinstance(s, While):
            return While(s.cond, s.invariants + ((f"{ghost_name}i", parse_formula(f"{formula_src} = {formula_src}")),),
                         s.decreasing, loops(s.body), s.span)
        return s

    body = loops(m.body)
    stmts = (VarDecl(ghost_name, extra, True, True), Assert(parse_formula("true")),
             GhostAssign(ghost_name, extra)) + body.stmts
    from dataclasses import replace

    return replace(m, body=Seq(stmts, body.span))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([p.name for p in corpus_files("valid")]),
       st.sampled_from(["0", "7", "-3"]))
def test_ghost_additions_keep_verdict(name, seed_term):
    for m in load(f"valid/{name}").methods:
        ints = [p.name for p in m.params if p.type.value == "Int"]
        arrs = [p.name for p in m.params if p.type.value == "Array Int"]
        term = f"sum({arrs[0]})" if arrs else (f"{ints[0]} * {seed_term}" if ints else seed_term)
        before = check_imperativeness(m)
        after = check_imperativeness(_add_ghost(m, term, "gz"))
        assert before.imperative and after.imperative
        assert after == check_imperativeness(_add_ghost(m, term, "gz"))


def test_ghost_method_round_trips_through_printer(sum_method):
    m = _add_ghost(sum_method, "sum(xs)", "gz")
    assert check_imperativeness(parse_method(pretty_print(m))).imperative
