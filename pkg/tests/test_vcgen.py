from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wyvc.syntax import (
    Binary, IntLit, Index, Quant, Store, Type, Var, expr_str, parse_formula, parse_method, parse_stmts,
)
from wyvc.vcgen import Tier, generate_obligations, obligation_names, substitute, to_sexpr, wp

from conftest import CORPUS, corpus_files, load

GOLDEN = Path(__file__).parent / "golden"
IDENTITY = "method id (x: Int) returns (r: Int) ensures r = x do return x"
SUM_NAMES = ["h.entry", "h.loop", "h.exit", "dec.1.nonneg", "dec.1.strict", "ensures.1"]


def test_wp_assignment():
    pre, side = wp(parse_stmts("x := x + 1"), parse_formula("x = 5"))
    assert pre == parse_formula("x + 1 = 5")
    assert side == []


def test_wp_skip():
    q = parse_formula("x = 5")
    assert wp(parse_stmts("skip"), q) == (q, [])


def test_wp_sum_loop_side_names(sum_method):
    loop = sum_method.body.stmts[2]
    _, side = wp(loop, parse_formula("s = sum(xs)"), {"xs": Type.ARRAY, "s": Type.INT, "i": Type.INT})
    assert {ob.name for ob in side} == {"h.entry", "h.loop", "h.exit", "dec.1.nonneg", "dec.1.strict"}


def test_substitute_plain():
    assert substitute(parse_formula("x > 0"), "x", parse_formula("y + 1")) == parse_formula("y + 1 > 0")


def test_substitute_avoids_capture():
    out = substitute(parse_formula("forall x :: x > y"), "y", Var("x"))
    assert isinstance(out, Quant)
    (bound, _), = out.binders
    assert bound != "x"
    assert out.body == Binary(">", Var(bound), Var("x"))


def test_substitute_store():
    f = parse_formula("a[i] = 0")
    st_ = Store(Var("a"), Var("j"), Var("v"))
    assert substitute(f, "a", st_) == Binary("=", Index(st_, Var("i")), IntLit(0))


def test_identity_method_obligations():
    obs = generate_obligations(parse_method(IDENTITY))
    assert obligation_names(obs) == ["ensures.1"]
    assert expr_str(obs[0].formula) == "forall x, x = x"
    assert obs[0].tier == Tier.SMT_FIRST  # no loop feeds it


def test_sum_obligations_named_and_tiered(sum_method):
    obs = generate_obligations(sum_method)
    assert obligation_names(obs) == SUM_NAMES
    agent_first = {ob.name for ob in obs if ob.tier == Tier.AGENT_FIRST}
    assert agent_first == {"h.loop", "ensures.1"}


def test_nested_loops_match_golden():
    obs = generate_obligations(load("valid/mul_nested.wyv").main)
    text = "".join(f"{ob.name} {ob.tier.value} :: {expr_str(ob.formula)}\n" for ob in obs)
    assert text == (GOLDEN / "mul_nested.obligations").read_text()
    inner_loop = next(ob for ob in obs if ob.name == "inner.loop")
    # the inner loop's obligations live under the outer invariant's hypotheses
    assert "r = i * b && 0 <= i && i <= a && i < a" in expr_str(inner_loop.formula)


def test_adding_invariant_only_adds_its_names(sum_method):
    src = (CORPUS / "valid/sum.wyv").read_text().replace(
        "    decreasing xs.size - i", "    invariant hb : i >= 0\n    decreasing xs.size - i")
    before = generate_obligations(sum_method)
    after = generate_obligations(parse_method(src))
    assert set(obligation_names(after)) - set(obligation_names(before)) == {"hb.entry", "hb.loop"}
    assert set(obligation_names(before)) <= set(obligation_names(after))
    old = {ob.name: ob.formula for ob in before}
    new = {ob.name: ob.formula for ob in after}
    assert new["h.entry"] == old["h.entry"]


def test_several_invariants_exit_under_first_name():
    m = parse_method("""method f (n: Int) returns (r: Int)
  requires n >= 0
  ensures r = n
do
  let mut r := 0
  while r < n
    invariant zz : r <= n
    invariant aa : r >= 0
    decreasing n - r
  { r := r + 1 }
  assert r = n
  return r""")
    names = obligation_names(generate_obligations(m))
    assert "aa.exit" in names and "zz.exit" not in names
    assert len(names) == len(set(names))


def test_call_precondition_obligation():
    prog = load("valid/sum_pair.wyv")
    names = obligation_names(generate_obligations(prog.main, prog))
    assert any(n.startswith("call.") and n.endswith(".pre") for n in names)


def test_obligation_json_shape(sum_method):
    js = generate_obligations(sum_method)[0].to_json()
    assert set(js) == {"name", "formula", "tier", "origin"}
    assert js["formula"] == to_sexpr(generate_obligations(sum_method)[0].formula)
    assert js["formula"].startswith("(forall ((xs (Array Int)))")


@pytest.mark.parametrize("path", corpus_files("valid") + corpus_files("mutants"), ids=lambda p: p.name)
def test_generation_is_deterministic(path):
    prog = load(f"{path.parent.name}/{path.name}")
    for m in prog.methods:
        a = generate_obligations(m, prog)
        b = generate_obligations(m, prog)
        assert a == b
        assert len(set(obligation_names(a))) == len(a)


@settings(max_examples=100, deadline=None)
@given(st.integers(-30, 30), st.integers(-30, 30), st.integers(-30, 30))
def test_substitution_commutes_with_evaluation(x, y, c):
    from wyvc.semantics import eval_formula

    f = parse_formula("x * 2 > y && (forall k :: 0 <= k && k < 3 ==> x + k != y)")
    term = parse_formula(f"y + {c}") if c >= 0 else parse_formula(f"y - {-c}")
    lhs = eval_formula(substitute(f, "x", term), {"y": y})
    rhs = eval_formula(f, {"x": y + c, "y": y})
    assert lhs == rhs
