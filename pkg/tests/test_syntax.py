from __future__ import annotations

import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wyvc.errors import ContractError, ParseError, WyvTypeError
from wyvc.syntax import (
    Apply, Binary, BoolLit, Index, IntLit, Length, Quant, Return, Type, Unary, Var, While,
    hash_method, parse_method, parse_program, pretty_print, print_program,
)
from wyvc.syntax.ast import MethodDecl, Param, Seq, VarDecl, If, Assign

from conftest import CORPUS, corpus_files

IDENTITY = "method id (x: Int) returns (r: Int) ensures r = x do return x"


def test_sum_parses_with_one_named_loop(sum_method):
    loops = [s for s in sum_method.body.stmts if isinstance(s, While)]
    assert len(loops) == 1
    assert [name for name, _ in loops[0].invariants] == ["h"]
    assert loops[0].decreasing == Binary("-", Length(Var("xs")), Var("i"))


def test_identity_method():
    m = parse_method(IDENTITY)
    assert m.requires == ()
    assert len(m.ensures) == 1
    assert m.body.stmts == (Return(Var("x")),)


def test_unnamed_invariant_rejected():
    src = """method f (n: Int) returns (r: Int)
do
  let mut r := 0
  while r < n
    invariant r <= n
    decreasing n - r
  { r := r + 1 }
  return r"""
    with pytest.raises(ContractError):
        parse_method(src)


def test_missing_decreasing_and_duplicate_names():
    base = """method f (n: Int) returns (r: Int)
  requires n >= 0
do
  let mut r := 0
  while r < n
    invariant a : r <= n
    {clauses}
  {{ r := r + 1 }}
  return r"""
    with pytest.raises(ContractError):
        parse_method(base.format(clauses=""))
    with pytest.raises(ContractError):
        parse_method(base.format(clauses="invariant a : r >= 0\n    decreasing n - r"))


def test_type_errors():
    with pytest.raises(WyvTypeError):
        parse_method("method f (x: Int) returns (r: Int) do return x && true")
    with pytest.raises(WyvTypeError):
        parse_method("method f (xs: Array Int) returns (r: Int) do return xs + 1")


def test_parse_error_position_and_expected():
    with pytest.raises(ParseError) as err:
        parse_method("method f (x: Int) returns (r: Int) do return x +")
    assert err.value.line == 1
    assert err.value.col >= 1
    assert "integer" in err.value.expected


@pytest.mark.parametrize("path", corpus_files("valid") + corpus_files("mutants") + corpus_files("leaky"),
                         ids=lambda p: f"{p.parent.name}/{p.name}")
def test_corpus_round_trip(path):
    prog = parse_program(path.read_text())
    again = parse_program(print_program(prog))
    assert again == prog


def test_identity_round_trip():
    m = parse_method(IDENTITY)
    assert parse_method(pretty_print(m)) == m


def test_digest_ignores_layout_and_comments(sum_method):
    squashed = " ".join(line.split("--")[0] for line in (CORPUS / "valid/sum.wyv").read_text().splitlines())
    assert hash_method(parse_method(squashed)) == hash_method(sum_method)


def test_digest_sees_semantic_change(sum_method):
    src = (CORPUS / "valid/sum.wyv").read_text().replace("s := s + xs[i]", "s := s - xs[i]")
    assert hash_method(parse_method(src)) != hash_method(sum_method)


def test_digest_alpha_normalized():
    a = parse_method("method f (x: Int) returns (r: Int) do let y := x + 1\n return y")
    b = parse_method("method f (x: Int) returns (r: Int) do let z := x + 1\n return z")
    assert hash_method(a) == hash_method(b)


def test_digest_stable_across_processes():
    code = ("import pathlib, wyvc.syntax as s\n"
            "for p in sorted(pathlib.Path(r'%s').glob('*/*.wyv')):\n"
            "    for m in s.parse_program(p.read_text()).methods: print(p.name, s.hash_method(m))\n" % CORPUS)
    runs = [subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
            for _ in range(2)]
    assert runs[0] == runs[1] and runs[0].count("\n") >= 30


# ---- generated ASTs

INT_VARS = ["x", "y"]


def int_exprs(formula: bool):
    leaves = st.one_of(st.integers(-20, 20).map(IntLit), st.sampled_from(INT_VARS).map(Var),
                       st.just(Length(Var("xs"))))

    def extend(inner):
        opts = [
            st.tuples(st.sampled_from(["+", "-", "*", "div", "mod"]), inner, inner)
            .map(lambda t: Binary(*t)),
            inner.map(lambda e: Unary("-", e)),
            inner.map(lambda e: Index(Var("xs"), e)),
        ]
        if formula:
            opts.append(st.just(Apply("sum", (Var("xs"),))))
            opts.append(inner.map(lambda e: Apply("count", (Apply("take", (Var("xs"), e)), e))))
        return st.one_of(*opts)

    return st.recursive(leaves, extend, max_leaves=6)


def bool_exprs(formula: bool):
    ints = int_exprs(formula)
    atoms = st.one_of(
        st.booleans().map(BoolLit),
        st.tuples(st.sampled_from(["<", "<=", ">", ">=", "=", "!="]), ints, ints).map(lambda t: Binary(*t)),
    )

    def extend(inner):
        opts = [
            st.tuples(st.sampled_from(["&&", "||", "==>"]), inner, inner).map(lambda t: Binary(*t)),
            inner.map(lambda e: Unary("!", e)),
        ]
        if formula:
            opts.append(st.tuples(st.sampled_from(["forall", "exists"]), inner)
                        .map(lambda t: Quant(t[0], (("k", Type.INT),), Binary("||", Binary(">=", Var("k"), Var("x")), t[1]))))
        return st.one_of(*opts)

    return st.recursive(atoms, extend, max_leaves=5)


@st.composite
def methods(draw):
    params = (Param("x", Type.INT), Param("y", Type.INT), Param("xs", Type.ARRAY))
    body = Seq((
        VarDecl("r", draw(int_exprs(False)), True, False),
        If(draw(bool_exprs(False)), Seq((Assign("r", draw(int_exprs(False))),)), Seq(())),
        Return(Var("r")),
    ))
    return MethodDecl("g", params, Param("r", Type.INT), (draw(bool_exprs(True)),),
                      (draw(bool_exprs(True)),), body)


@settings(max_examples=300, deadline=None)
@given(methods())
def test_print_parse_identity_on_generated_methods(m):
    assert parse_method(pretty_print(m)) == m


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="method f(x:Int)returns r do {}+-*<=>&|!;:=[]0123456789\n ", max_size=60))
def test_parse_errors_point_inside_the_input(src):
    try:
        parse_method(src)
    except ParseError as exc:
        lines = src.split("\n")
        assert 1 <= exc.line <= len(lines) + 1
        if exc.line <= len(lines):
            assert 1 <= exc.col <= len(lines[exc.line - 1]) + 1
    except (ContractError, WyvTypeError):
        pass
