from __future__ import annotations

import hashlib
from dataclasses import replace

from .ast import (
    Apply, ArrayLit, ArrayStore, Assert, Assign, Binary, CallStmt, Expr, GhostAssign,
    If, Index, Length, MethodDecl, Quant, Return, Seq, Stmt, Store, Unary, Var, VarDecl,
    While,
)
from .printer import expr_str, pretty_print


def _rename_expr(e: Expr, names: dict[str, str], counter: list[int]) -> Expr:
    if isinstance(e, Var):
        return Var(names.get(e.name, e.name))
    if isinstance(e, Quant):
        inner = dict(names)
        binders = []
        for n, t in e.binders:
            counter[0] += 1
            inner[n] = f"q{counter[0]}"
            binders.append((inner[n], t))
        return Quant(e.kind, tuple(binders), _rename_expr(e.body, inner, counter))
    r = lambda x: _rename_expr(x, names, counter)  # noqa: E731
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
    return e


def alpha_normalize(m: MethodDecl) -> MethodDecl:
    """Rename locals to ``v1, v2, ...`` and bound variables to ``q1, q2, ...``.

    Parameters, the return name, method name and invariant names are part of
    a method's interface (invariant names key the obligations) and are kept.
    """
    names: dict[str, str] = {}
    counter = [0]
    nlocal = [0]

    def ex(e: Expr) -> Expr:
        return _rename_expr(e, names, counter)

    def st(s: Stmt) -> Stmt:
        if isinstance(s, Seq):
            return Seq(tuple(st(c) for c in s.stmts))
        if isinstance(s, VarDecl):
            init = ex(s.init)
            nlocal[0] += 1
            names[s.name] = f"v{nlocal[0]}"
            return VarDecl(names[s.name], init, s.mutable, s.ghost)
        if isinstance(s, Assign):
            return Assign(names.get(s.name, s.name), ex(s.value))
        if isinstance(s, GhostAssign):
            return GhostAssign(names.get(s.name, s.name), ex(s.value))
        if isinstance(s, ArrayStore):
            return ArrayStore(names.get(s.name, s.name), ex(s.index), ex(s.value))
        if isinstance(s, If):
            return If(ex(s.cond), st(s.then), st(s.orelse))
        if isinstance(s, While):
            return While(ex(s.cond), tuple((n, ex(f)) for n, f in s.invariants),
                         ex(s.decreasing), st(s.body))
        if isinstance(s, Return):
            return Return(ex(s.value))
        if isinstance(s, Assert):
            return Assert(ex(s.formula))
        if isinstance(s, CallStmt):
            return CallStmt(names.get(s.target, s.target), s.callee, tuple(ex(a) for a in s.args))
        return s

    requires = tuple(ex(r) for r in m.requires)
    ensures = tuple(ex(e) for e in m.ensures)
    body = st(m.body)
    return replace(m, requires=requires, ensures=ensures, body=body)


def hash_method(m: MethodDecl) -> str:
    """SHA-256 hex digest of the canonical text of the alpha-normalized method."""
    text = pretty_print(alpha_normalize(m))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def hash_formula(f: Expr) -> str:
    return hashlib.sha256(expr_str(f).encode("utf-8")).hexdigest()
