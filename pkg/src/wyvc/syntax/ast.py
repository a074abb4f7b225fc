"""AST for the wyv mini-language.

Expressions and formulas share one node family: a formula is simply a
Bool-typed expression that may additionally use quantifiers, implication
and array stores. Nodes are frozen dataclasses so structural equality and
hashing come for free; source spans are excluded from comparison.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional


class Type(enum.Enum):
    INT = "Int"
    BOOL = "Bool"
    ARRAY = "Array Int"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _span() -> Optional[Span]:
    return field(default=None, compare=False, hash=False, repr=False)


# ---------------------------------------------------------------- expressions


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class ArrayLit(Expr):
    elems: tuple[Expr, ...]


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "-" or "!"
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Index(Expr):
    arr: Expr
    idx: Expr


@dataclass(frozen=True)
class Length(Expr):
    arr: Expr


@dataclass(frozen=True)
class Store(Expr):
    arr: Expr
    idx: Expr
    val: Expr


@dataclass(frozen=True)
class Apply(Expr):
    """Application of a library spec function such as ``sum(xs)``."""

    fn: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Quant(Expr):
    kind: str  # "forall" | "exists"
    binders: tuple[tuple[str, Type], ...]
    body: Expr


ARITH_OPS = frozenset({"+", "-", "*", "div", "mod"})
CMP_OPS = frozenset({"<", "<=", ">", ">="})
EQ_OPS = frozenset({"=", "!="})
BOOL_OPS = frozenset({"&&", "||", "==>"})


TRUE = BoolLit(True)
FALSE = BoolLit(False)


def conj(parts) -> Expr:
    """Right-nested conjunction; ``true`` for an empty sequence."""
    parts = [p for p in parts if p != TRUE]
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Binary("&&", p, out)
    return out


def implies(hyp: Expr, goal: Expr) -> Expr:
    if hyp == TRUE:
        return goal
    if goal == TRUE:
        return TRUE
    return Binary("==>", hyp, goal)


def neg(e: Expr) -> Expr:
    if isinstance(e, BoolLit):
        return BoolLit(not e.value)
    return Unary("!", e)


def split_conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op == "&&":
        return split_conjuncts(e.left) + split_conjuncts(e.right)
    return [e]


def forall(binders, body: Expr) -> Expr:
    binders = tuple(binders)
    if not binders or body == TRUE:
        return body
    return Quant("forall", binders, body)


def children(e: Expr) -> Iterator[Expr]:
    if isinstance(e, (Unary,)):
        yield e.arg
    elif isinstance(e, Binary):
        yield e.left
        yield e.right
    elif isinstance(e, Index):
        yield e.arr
        yield e.idx
    elif isinstance(e, Length):
        yield e.arr
    elif isinstance(e, Store):
        yield e.arr
        yield e.idx
        yield e.val
    elif isinstance(e, (Apply,)):
        yield from e.args
    elif isinstance(e, ArrayLit):
        yield from e.elems
    elif isinstance(e, Quant):
        yield e.body


def subexprs(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from subexprs(c)


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Quant):
        return free_vars(e.body) - {n for n, _ in e.binders}
    out: set[str] = set()
    for c in children(e):
        out |= free_vars(c)
    return out


def all_names(e: Expr) -> set[str]:
    """Every identifier occurring in ``e``, free or bound."""
    out: set[str] = set()
    for s in subexprs(e):
        if isinstance(s, Var):
            out.add(s.name)
        elif isinstance(s, Quant):
            out.update(n for n, _ in s.binders)
    return out


# ----------------------------------------------------------------- statements


class Stmt:
    __slots__ = ()


@dataclass(frozen=True)
class Skip(Stmt):
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class VarDecl(Stmt):
    name: str
    init: Expr
    mutable: bool = False
    ghost: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Assign(Stmt):
    name: str
    value: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ArrayStore(Stmt):
    name: str
    index: Expr
    value: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class GhostAssign(Stmt):
    name: str
    value: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Stmt
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class While(Stmt):
    cond: Expr
    invariants: tuple[tuple[str, Expr], ...]
    decreasing: Expr
    body: Stmt
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Seq(Stmt):
    stmts: tuple[Stmt, ...]
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Return(Stmt):
    value: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class CallStmt(Stmt):
    target: str
    callee: str
    args: tuple[Expr, ...]
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Assert(Stmt):
    formula: Expr
    span: Optional[Span] = _span()


def walk(s: Stmt) -> Iterator[Stmt]:
    """Pre-order traversal in source order."""
    yield s
    if isinstance(s, Seq):
        for c in s.stmts:
            yield from walk(c)
    elif isinstance(s, If):
        yield from walk(s.then)
        yield from walk(s.orelse)
    elif isinstance(s, While):
        yield from walk(s.body)


def loops(s: Stmt) -> list[While]:
    return [x for x in walk(s) if isinstance(x, While)]


def assigned_vars(s: Stmt) -> list[str]:
    """Variables written in ``s`` that are declared outside of it, in first-write order."""
    declared = {x.name for x in walk(s) if isinstance(x, VarDecl)}
    out: list[str] = []
    for x in walk(s):
        if isinstance(x, (Assign, ArrayStore, GhostAssign)):
            name = x.name
        elif isinstance(x, CallStmt):
            name = x.target
        else:
            continue
        if name not in declared and name not in out:
            out.append(name)
    return out


# -------------------------------------------------------------------- methods


@dataclass(frozen=True)
class Param:
    name: str
    type: Type


@dataclass(frozen=True)
class MethodDecl:
    name: str
    params: tuple[Param, ...]
    ret: Param
    requires: tuple[Expr, ...]
    ensures: tuple[Expr, ...]
    body: Stmt
    span: Optional[Span] = _span()

    def param_names(self) -> list[str]:
        return [p.name for p in self.params]


@dataclass(frozen=True)
class Program:
    methods: tuple[MethodDecl, ...]

    def get(self, name: str) -> MethodDecl:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(m.name == name for m in self.methods)

    @property
    def main(self) -> MethodDecl:
        """The last method in the file; callees are declared before callers."""
        return self.methods[-1]
