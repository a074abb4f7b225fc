"""Weakest-precondition VC generation with deterministic obligation names.

wp runs backwards over a *labelled* postcondition: a mapping from an
obligation name to the conjuncts that will end up in that obligation.
Labels survive substitution and case splits, so every verification
condition keeps the name of the annotation it came from:

* invariant ``X`` of a loop yields ``X.entry`` and ``X.loop``;
* the loop's continuation yields ``X0.exit`` for the lexicographically
  first invariant name ``X0`` (ensures clauses reaching the loop exit keep
  their own ``ensures.j`` name);
* the k-th loop's measure yields ``dec.k.nonneg`` and ``dec.k.strict``;
* assertions, call preconditions and top-level definedness checks yield
  ``assert.k``, ``call.k.pre`` and ``safe``.

Runtime-safety conditions (array bounds, nonzero divisors) are conjoined
into whichever obligation is being derived where the expression occurs.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .errors import ContractError, UnsupportedConstruct
from .syntax.ast import (
    TRUE, Apply, ArrayLit, ArrayStore, Assert, Assign, Binary, BoolLit, CallStmt, Expr,
    GhostAssign, If, Index, IntLit, Length, MethodDecl, Program, Quant, Return, Seq, Skip,
    Span, Stmt, Store, Type, Unary, Var, VarDecl, While, all_names, assigned_vars, conj,
    forall, free_vars, implies, neg, split_conjuncts, walk,
)
from .syntax.check import method_env
from .syntax.printer import expr_str

# ------------------------------------------------------------- substitution


def fresh_name(base: str, avoid: set[str]) -> str:
    stem = re.sub(r"_\d+$", "", base)
    for k in itertools.count(1):
        cand = f"{stem}_{k}"
        if cand not in avoid:
            return cand
    raise AssertionError("unreachable")


def substitute_many(f: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneous capture-avoiding substitution."""
    mapping = {k: v for k, v in mapping.items() if k in free_vars(f)}
    if not mapping:
        return f
    incoming: set[str] = set()
    for v in mapping.values():
        incoming |= free_vars(v)
    return _subst(f, mapping, incoming)


def _subst(e: Expr, mapping: dict[str, Expr], incoming: set[str]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, (IntLit, BoolLit)):
        return e
    if isinstance(e, Quant):
        mapping = {k: v for k, v in mapping.items() if k not in {n for n, _ in e.binders}}
        if not mapping:
            return e
        body = e.body
        binders = []
        avoid = incoming | all_names(e.body) | set(mapping)
        for name, t in e.binders:
            if name in incoming:
                new = fresh_name(name, avoid)
                avoid.add(new)
                body = _subst(body, {name: Var(new)}, {new})
                binders.append((new, t))
            else:
                binders.append((name, t))
        return Quant(e.kind, tuple(binders), _subst(body, mapping, incoming))
    r = lambda x: _subst(x, mapping, incoming)  # noqa: E731
    if isinstance(e, Unary):
        return Unary(e.op, r(e.arg))
    if isinstance(e, Binary):
        return Binary(e.op, r(e.left), r(e.right))
    if isinstance(e, Index):
        return Index(r(e.arr), r(e.idx))
    if isinstance(e, Length):
        return Length(r(e.arr))
    if isinstance(e, Store):
        return Store(r(e.arr), r(e.idx), r(e.val))
    if isinstance(e, Apply):
        return Apply(e.fn, tuple(r(a) for a in e.args))
    if isinstance(e, ArrayLit):
        return ArrayLit(tuple(r(a) for a in e.elems))
    raise UnsupportedConstruct(repr(e))


def substitute(f: Expr, var: str, term: Expr) -> Expr:
    return substitute_many(f, {var: term})


# ------------------------------------------------------------- definedness


def definedness(e: Expr) -> list[Expr]:
    """Conditions under which evaluating executable expression ``e`` cannot fault."""
    if isinstance(e, Index):
        return definedness(e.arr) + definedness(e.idx) + [
            Binary("<=", IntLit(0), e.idx), Binary("<", e.idx, Length(e.arr))]
    if isinstance(e, Binary):
        left = definedness(e.left)
        right = definedness(e.right)
        if e.op == "&&":
            return left + [implies(e.left, d) for d in right]
        if e.op == "||":
            return left + [implies(neg(e.left), d) for d in right]
        if e.op == "==>":
            return left + [implies(e.left, d) for d in right]
        if e.op in ("div", "mod"):
            return left + right + [Binary("!=", e.right, IntLit(0))]
        return left + right
    if isinstance(e, Quant):
        return []
    if isinstance(e, Store):
        return (definedness(e.arr) + definedness(e.idx) + definedness(e.val) + [
            Binary("<=", IntLit(0), e.idx), Binary("<", e.idx, Length(e.arr))])
    out: list[Expr] = []
    for c in _kids(e):
        out += definedness(c)
    return out


def _kids(e: Expr):
    if isinstance(e, Unary):
        return [e.arg]
    if isinstance(e, Length):
        return [e.arr]
    if isinstance(e, Apply):
        return list(e.args)
    if isinstance(e, ArrayLit):
        return list(e.elems)
    return []


# ------------------------------------------------------------- obligations


class Tier(enum.Enum):
    SMT_FIRST = "SmtFirst"
    AGENT_FIRST = "AgentFirst"


def tier_for(name: str, has_loops: bool = True) -> Tier:
    """Loop preservation goes to agents; so does ensures, unless no loop feeds it."""
    if name.endswith(".loop") or (has_loops and name.startswith("ensures.")):
        return Tier.AGENT_FIRST
    return Tier.SMT_FIRST


@dataclass(frozen=True)
class Obligation:
    name: str
    formula: Expr
    origin: Optional[Span] = None
    tier: Tier = Tier.SMT_FIRST

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "formula": to_sexpr(self.formula),
            "tier": self.tier.value,
            "origin": None if self.origin is None else {"line": self.origin.line, "col": self.origin.col},
        }


def to_sexpr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value) if e.value >= 0 else f"(- {-e.value})"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        return f"({'-' if e.op == '-' else 'not'} {to_sexpr(e.arg)})"
    if isinstance(e, Binary):
        op = {"&&": "and", "||": "or", "==>": "=>", "!=": "distinct"}.get(e.op, e.op)
        return f"({op} {to_sexpr(e.left)} {to_sexpr(e.right)})"
    if isinstance(e, Index):
        return f"(select {to_sexpr(e.arr)} {to_sexpr(e.idx)})"
    if isinstance(e, Length):
        return f"(size {to_sexpr(e.arr)})"
    if isinstance(e, Store):
        return f"(store {to_sexpr(e.arr)} {to_sexpr(e.idx)} {to_sexpr(e.val)})"
    if isinstance(e, Apply):
        return "(" + " ".join([e.fn] + [to_sexpr(a) for a in e.args]) + ")"
    if isinstance(e, ArrayLit):
        return "(array" + "".join(" " + to_sexpr(x) for x in e.elems) + ")"
    if isinstance(e, Quant):
        bs = " ".join(f"({n} {'(Array Int)' if t == Type.ARRAY else t.value})" for n, t in e.binders)
        return f"({e.kind} ({bs}) {to_sexpr(e.body)})"
    raise UnsupportedConstruct(repr(e))


# ---------------------------------------------------------------------- wp

Post = dict  # label -> list[Expr]


def _add(post: Post, label: str, *formulas: Expr) -> None:
    items = [f for f in formulas if f != TRUE]
    post.setdefault(label, [])
    post[label].extend(items)


def _map(post: Post, fn) -> Post:
    return {label: [fn(q) for q in qs] for label, qs in post.items()}


class _WP:
    def __init__(self, root: Stmt, env: Mapping[str, Type], program: Optional[Program],
                 ret_name: Optional[str], reserved: set[str]):
        self.env = dict(env)
        self.program = program
        self.ret_name = ret_name
        self.loop_index: dict[int, int] = {}
        self.call_index: dict[int, int] = {}
        self.assert_index: dict[int, int] = {}
        for s in walk(root):
            if isinstance(s, While):
                self.loop_index[id(s)] = len(self.loop_index) + 1
            elif isinstance(s, CallStmt):
                self.call_index[id(s)] = len(self.call_index) + 1
            elif isinstance(s, Assert):
                self.assert_index[id(s)] = len(self.assert_index) + 1
        self.avoid = set(reserved) | set(self.env)
        self.origins: dict[str, Span] = {}

    def fresh(self, base: str) -> str:
        name = fresh_name(base, self.avoid)
        self.avoid.add(name)
        return name

    def origin(self, label: str, span) -> None:
        if span is not None:
            self.origins.setdefault(label, span)

    def wp(self, s: Stmt, post: Post, ctx: str) -> Post:
        if isinstance(s, Skip):
            return post
        if isinstance(s, Seq):
            for c in reversed(s.stmts):
                post = self.wp(c, post, ctx)
            return post
        if isinstance(s, (VarDecl, Assign, GhostAssign)):
            value = s.init if isinstance(s, VarDecl) else s.value
            out = _map(post, lambda q: substitute(q, s.name, value))
            self._def(out, ctx, value, s.span)
            return out
        if isinstance(s, ArrayStore):
            stored = Store(Var(s.name), s.index, s.value)
            out = _map(post, lambda q: substitute(q, s.name, stored))
            self._def(out, ctx, Index(Var(s.name), s.index), s.span)
            self._def(out, ctx, s.value, s.span)
            return out
        if isinstance(s, If):
            then = self.wp(s.then, post, ctx)
            orelse = self.wp(s.orelse, post, ctx)
            out: Post = {}
            for label in list(then) + [k for k in orelse if k not in then]:
                t, e = then.get(label), orelse.get(label)
                if t is not None and t == e:
                    out[label] = list(t)
                    continue
                parts = []
                if t:
                    parts.append(implies(s.cond, conj(t)))
                if e:
                    parts.append(implies(neg(s.cond), conj(e)))
                _add(out, label, *parts)
            self._def(out, ctx, s.cond, s.span)
            return out
        if isinstance(s, Return):
            out = post
            if self.ret_name is not None:
                out = _map(post, lambda q: substitute(q, self.ret_name, s.value))
            self._def(out, ctx, s.value, s.span)
            return out
        if isinstance(s, Assert):
            label = f"assert.{self.assert_index[id(s)]}"
            out = _map(post, lambda q: implies(s.formula, q))
            _add(out, label, s.formula)
            self.origin(label, s.span)
            return out
        if isinstance(s, CallStmt):
            return self._call(s, post, ctx)
        if isinstance(s, While):
            return self._loop(s, post, ctx)
        raise UnsupportedConstruct(type(s).__name__)

    def _def(self, post: Post, ctx: str, e: Expr, span) -> None:
        conds = definedness(e)
        if conds:
            _add(post, ctx, *conds)
            self.origin(ctx, span)

    def _call(self, s: CallStmt, post: Post, ctx: str) -> Post:
        if self.program is None or s.callee not in self.program:
            raise UnsupportedConstruct(f"call to unknown method {s.callee!r}")
        callee = self.program.get(s.callee)
        k = self.call_index[id(s)]
        r = self.fresh(s.target)
        actuals = {p.name: a for p, a in zip(callee.params, s.args)}
        pre = substitute_many(conj(callee.requires), actuals)
        ens = substitute_many(conj(callee.ensures), {**actuals, callee.ret.name: Var(r)})
        binder = ((r, callee.ret.type),)
        out = _map(post, lambda q: forall(binder, implies(ens, substitute(q, s.target, Var(r)))))
        label = f"call.{k}.pre"
        _add(out, label, pre)
        self.origin(label, s.span)
        for a in s.args:
            self._def(out, ctx, a, s.span)
        return out

    def _loop(self, w: While, post: Post, ctx: str) -> Post:
        k = self.loop_index[id(w)]
        if not w.invariants:
            raise ContractError("loop needs at least one named invariant", w.span)
        names = [n for n, _ in w.invariants]
        first = min(names)
        inv = conj([f for _, f in w.invariants])
        mod = [(v, self.env[v]) for v in assigned_vars(w.body)]
        measure = Var(self.fresh(f"dec{k}"))

        def close(hyp: Expr, goal: Expr) -> Expr:
            fv = free_vars(hyp) | free_vars(goal)
            return forall([(v, t) for v, t in mod if v in fv], implies(hyp, goal))

        hyp_in = conj([inv, w.cond])
        hyp_out = conj([inv, neg(w.cond)])
        body_post: Post = {f"{n}.loop": [f] for n, f in w.invariants}
        strict = f"dec.{k}.strict"
        body_post[strict] = [Binary("<", w.decreasing, measure)]
        body_pre = self.wp(w.body, body_post, ctx=f"{first}.loop")

        out: Post = {}
        for n, f in w.invariants:
            _add(out, f"{n}.entry", f)
            self.origin(f"{n}.entry", w.span)
            self.origin(f"{n}.loop", w.span)
        for label, qs in body_pre.items():
            goal = conj(qs)
            if label == strict:
                goal = substitute(goal, measure.name, w.decreasing)
            _add(out, label, close(hyp_in, goal))
        cond_ok = definedness(w.cond)
        if cond_ok:
            _add(out, f"{first}.loop", close(inv, conj(cond_ok)))
        nonneg = f"dec.{k}.nonneg"
        _add(out, nonneg, close(hyp_in, conj(definedness(w.decreasing)
                                               + [Binary(">=", w.decreasing, IntLit(0))])))
        _add(out, strict)
        exit_label = f"{first}.exit"
        _add(out, exit_label)
        for label, qs in post.items():
            target = exit_label if label in ("safe", "post") else label
            _add(out, target, close(hyp_out, conj(qs)))
        for label in (nonneg, strict, exit_label):
            self.origin(label, w.span)
        return out


def wp(stmt: Stmt, post: Expr, env: Optional[Mapping[str, Type]] = None,
       program: Optional[Program] = None) -> tuple[Expr, list[Obligation]]:
    """Weakest precondition of ``stmt`` for ``post``.

    Returns the precondition proper together with the side obligations
    contributed by loops, asserts and calls (unclosed; their free
    variables are those live before ``stmt``). The full weakest
    precondition is the conjunction of both.
    """
    env = dict(env or {})
    for e in [post]:
        for name in free_vars(e):
            env.setdefault(name, Type.INT)
    gen = _WP(stmt, env, program, None, set())
    out = gen.wp(stmt, {"post": [post]}, ctx="post")
    pre = conj(out.pop("post", []))
    side = [Obligation(n, conj(qs), gen.origins.get(n), tier_for(n)) for n, qs in out.items()]
    return pre, _ordered(side, stmt)


def _sort_key(name: str, inv_pos: Mapping[str, tuple[int, int]]):
    parts = name.split(".")
    if parts[0] == "dec":
        return (0, int(parts[1]), 3, 0 if parts[2] == "nonneg" else 1)
    if parts[0] == "assert":
        return (1, int(parts[1]), 0, 0)
    if parts[0] == "call":
        return (2, int(parts[1]), 0, 0)
    if parts[0] == "safe":
        return (3, 0, 0, 0)
    if parts[0] == "ensures":
        return (4, int(parts[1]), 0, 0)
    if parts[0] in inv_pos:
        loop, pos = inv_pos[parts[0]]
        return (0, loop, {"entry": 0, "loop": 1, "exit": 2}[parts[1]], pos)
    return (5, 0, 0, 0)


def _ordered(obs: list[Obligation], body: Stmt) -> list[Obligation]:
    inv_pos = {}
    for k, w in enumerate([s for s in walk(body) if isinstance(s, While)], 1):
        for pos, (n, _) in enumerate(w.invariants):
            inv_pos[n] = (k, pos)
    return sorted(obs, key=lambda ob: (_sort_key(ob.name, inv_pos), ob.name))


def split_ensures(m: MethodDecl) -> list[Expr]:
    out: list[Expr] = []
    for e in m.ensures:
        out += split_conjuncts(e)
    return out


def generate_obligations(m: MethodDecl, program: Optional[Program] = None) -> list[Obligation]:
    """All named verification conditions of ``m``, closed over its parameters."""
    env = method_env(m)
    gen = _WP(m.body, env, program, m.ret.name, {m.ret.name})
    post: Post = {f"ensures.{j}": [e] for j, e in enumerate(split_ensures(m), 1)}
    for j in range(1, len(post) + 1):
        gen.origin(f"ensures.{j}", m.span)
    pre = gen.wp(m.body, post, ctx="safe")
    loops = any(isinstance(s, While) for s in walk(m.body))
    hyp = conj(list(m.requires))
    params = [(p.name, p.type) for p in m.params]
    obs = []
    for name, qs in pre.items():
        goal = conj(qs)
        fv = free_vars(hyp) | free_vars(goal)
        formula = forall([(v, t) for v, t in params if v in fv], implies(hyp, goal))
        obs.append(Obligation(name, formula, gen.origins.get(name, m.span), tier_for(name, loops)))
    return _ordered(obs, m.body)


# ------------------------------------------------------- skolemization


@dataclass(frozen=True)
class Refutation:
    """``not F`` with every existential (after negation) lifted to a named constant.

    ``negation`` is true in a state binding ``binders`` iff that state is a
    counterexample to the original formula.
    """

    binders: tuple[tuple[str, Type], ...]
    negation: Expr


def refutation(f: Expr) -> Refutation:
    binders: list[tuple[str, Type]] = []
    avoid = set(all_names(f))

    def declare(q: Quant):
        mapping = {}
        taken = {n for n, _ in binders}
        for name, t in q.binders:
            new = name if name not in taken else fresh_name(name, avoid | taken)
            avoid.add(new)
            taken.add(new)
            binders.append((new, t))
            if new != name:
                mapping[name] = Var(new)
        return substitute_many(q.body, mapping)

    def pos(e: Expr) -> Expr:
        if isinstance(e, Quant) and e.kind == "exists":
            return pos(declare(e))
        if isinstance(e, Binary) and e.op == "&&":
            return Binary("&&", pos(e.left), pos(e.right))
        return e

    def negate(e: Expr) -> Expr:
        if isinstance(e, Quant) and e.kind == "forall":
            return negate(declare(e))
        if isinstance(e, Binary) and e.op == "==>":
            return conj([pos(e.left), negate(e.right)])
        if isinstance(e, Binary) and e.op == "&&":
            return Binary("||", negate(e.left), negate(e.right))
        if isinstance(e, Binary) and e.op == "||":
            return Binary("&&", negate(e.left), negate(e.right))
        if isinstance(e, Unary) and e.op == "!":
            return pos(e.arg)
        if isinstance(e, BoolLit):
            return BoolLit(not e.value)
        return Unary("!", e)

    negation = negate(f)
    return Refutation(tuple(binders), negation)


@dataclass(frozen=True)
class Spine:
    """Leading universals and implication hypotheses of a formula."""

    binders: tuple[tuple[str, Type], ...]
    hyps: tuple[Expr, ...]
    goal: Expr

    def rebuild(self, extra_hyps: Iterable[Expr], goal: Expr) -> Expr:
        return forall(self.binders, implies(conj(list(self.hyps) + list(extra_hyps)), goal))


def spine(f: Expr) -> Spine:
    binders: list[tuple[str, Type]] = []
    hyps: list[Expr] = []
    avoid = set(all_names(f))
    while True:
        if isinstance(f, Quant) and f.kind == "forall":
            mapping = {}
            taken = {n for n, _ in binders}
            for name, t in f.binders:
                new = name if name not in taken else fresh_name(name, avoid | taken)
                avoid.add(new)
                binders.append((new, t))
                if new != name:
                    mapping[name] = Var(new)
            f = substitute_many(f.body, mapping)
        elif isinstance(f, Binary) and f.op == "==>":
            hyps += split_conjuncts(f.left)
            f = f.right
        else:
            return Spine(tuple(binders), tuple(hyps), f)


def obligation_names(obs: Iterable[Obligation]) -> list[str]:
    return [ob.name for ob in obs]


def formula_text(ob: Obligation) -> str:
    return expr_str(ob.formula)
