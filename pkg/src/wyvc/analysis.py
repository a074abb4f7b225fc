"""Specification disproof and a static check for functional leakage.

Disproof looks for an input x with P(x) such that no output y satisfies
Q(x, y). Inputs are enumerated concretely; for each candidate the solver
gets one query, "forall y. not Q(x, y)", so no single query mixes
quantifier alternation.

The judge is a syntactic approximation of "is this really imperative
code?". It rejects executable code that leans on specification functions,
quantifiers or whole-array comparisons, and results that come from one
such expression rather than from a loop.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import EvalError, WyvError
from .semantics import eval_formula
from .smt import SolverConfig, SolverVerdict, check_validity, emit_formula
from .speclib import DEFAULT_LIBRARY, SpecLibraryConfig
from .syntax.ast import (
    TRUE, Apply, ArrayLit, ArrayStore, Assert, Assign, Binary, BoolLit, CallStmt, Expr,
    GhostAssign, If, IntLit, MethodDecl, Quant, Return, Seq, Stmt, Store, Type, Var,
    VarDecl, While, conj, forall, free_vars, neg, subexprs,
)
from .syntax.check import method_env
from .syntax.printer import expr_str
from .vcgen import substitute_many

# ----------------------------------------------------------------- disproof


@dataclass(frozen=True)
class DisproofGoal:
    inputs: tuple[tuple[str, Type], ...]
    output: tuple[str, Type]
    pre: Expr
    post: Expr

    @property
    def claim(self) -> Expr:
        """exists inputs. P && forall output. !Q"""
        body = conj([self.pre, forall((self.output,), neg(self.post))])
        return Quant("exists", self.inputs, body) if self.inputs else body

    def to_json(self) -> dict:
        return {"inputs": [[n, t.value] for n, t in self.inputs], "output": [self.output[0], self.output[1].value],
                "pre": expr_str(self.pre), "post": expr_str(self.post), "claim": expr_str(self.claim)}


def make_disproof_goal(m: MethodDecl) -> DisproofGoal:
    if not m.ensures:
        raise ValueError(f"{m.name} has no ensures clause to disprove")
    return DisproofGoal(tuple((p.name, p.type) for p in m.params), (m.ret.name, m.ret.type),
                        conj(list(m.requires)), conj(list(m.ensures)))


@dataclass(frozen=True)
class DisproofDomain:
    int_bound: int = 3
    max_len: int = 2
    elem_bound: int = 1
    max_candidates: int = 12

    def values(self, t: Type) -> list:
        if t == Type.BOOL:
            return [False, True]
        small = sorted(range(-self.int_bound, self.int_bound + 1), key=lambda v: (abs(v), v > 0))
        if t == Type.INT:
            return small
        elems = sorted(range(-self.elem_bound, self.elem_bound + 1), key=lambda v: (abs(v), v > 0))
        out = []
        for n in range(self.max_len + 1):
            out += [tuple(c) for c in itertools.product(elems, repeat=n)]
        return out


def _literal(v) -> Expr:
    if isinstance(v, bool):
        return BoolLit(v)
    if isinstance(v, int):
        return IntLit(v)
    return ArrayLit(tuple(IntLit(x) for x in v))


def _candidates(goal: DisproofGoal, domain: DisproofDomain) -> Iterator[dict]:
    """Inputs satisfying P, ordered by total size first."""
    spaces = [domain.values(t) for _, t in goal.inputs]
    combos = list(itertools.product(*spaces))
    combos.sort(key=lambda c: sum(_size(v) for v in c))
    for combo in combos:
        env = {n: v for (n, _), v in zip(goal.inputs, combo)}
        try:
            if eval_formula(goal.pre, env):
                yield env
        except (EvalError, WyvError):
            continue


def _size(v) -> int:
    if isinstance(v, tuple):
        return len(v) + sum(abs(x) for x in v)
    return abs(int(v))


@dataclass(frozen=True)
class DisproofResult:
    status: str  # Disproved | Inconclusive
    witness: Optional[dict] = None
    transcript: str = ""
    verdict: Optional[SolverVerdict] = None
    candidates: int = 0
    notes: tuple[str, ...] = ()

    @property
    def disproved(self) -> bool:
        return self.status == "Disproved"

    def to_json(self) -> dict:
        out = {"status": self.status, "candidates": self.candidates}
        if self.witness is not None:
            out["witness"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.witness.items()}
            out["transcript"] = self.transcript
            out["verdict"] = self.verdict.to_json() if self.verdict else None
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def no_output_formula(goal: DisproofGoal, witness: dict) -> Expr:
    """forall output. !Q(witness, output): valid iff the witness admits no output."""
    q = substitute_many(goal.post, {n: _literal(v) for n, v in witness.items()})
    return forall((goal.output,), neg(q))


def bounded_disprove(goal: DisproofGoal, domain: DisproofDomain = DisproofDomain(),
                     timeout_ms: Optional[int] = None, *, library: SpecLibraryConfig = DEFAULT_LIBRARY,
                     solver: Optional[SolverConfig] = None, workers: int = 4) -> DisproofResult:
    cands = list(itertools.islice(_candidates(goal, domain), domain.max_candidates))
    if not cands:
        return DisproofResult("Inconclusive", candidates=0, notes=("no input satisfies the precondition",))

    def query(w: dict):
        script = emit_formula("disprove", no_output_formula(goal, w), library)
        return script, check_validity(script, timeout_ms, solver)

    notes = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(query, cands))
    for w, (script, v) in zip(cands, results):
        if v.valid:
            return DisproofResult("Disproved", w, script.text, v, len(cands))
        if v.kind not in ("Invalid",):
            notes.append(f"{w}: {v.kind}")
    return DisproofResult("Inconclusive", candidates=len(cands), notes=tuple(notes))


def replay_disproof(goal: DisproofGoal, result: DisproofResult, timeout_ms: Optional[int] = None,
                    library: SpecLibraryConfig = DEFAULT_LIBRARY) -> bool:
    """Re-check both halves of a Disproved result from scratch."""
    if not result.disproved or result.witness is None:
        return False
    if not eval_formula(goal.pre, result.witness):
        return False
    script = emit_formula("disprove", no_output_formula(goal, result.witness), library)
    return check_validity(script, timeout_ms).valid


# -------------------------------------------------------------------- judge

RULES = {
    "R1": "specification function used in executable code",
    "R2": "result computed by one non-constant-time expression outside any loop",
    "R3": "non-constant-time primitive (quantifier, array comparison, store) in executable code",
}


@dataclass(frozen=True)
class Violation:
    location: str
    rule: str
    excerpt: str

    def to_json(self) -> dict:
        return {"location": self.location, "rule": self.rule, "excerpt": self.excerpt}


@dataclass(frozen=True)
class JudgeVerdict:
    violations: tuple[Violation, ...] = ()

    @property
    def imperative(self) -> bool:
        return not self.violations

    @property
    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def to_json(self) -> dict:
        return {"imperative": self.imperative, "violations": [v.to_json() for v in self.violations]}


def _executable_exprs(s: Stmt, in_loop: bool = False) -> Iterator[tuple[Stmt, Expr, bool]]:
    """(statement, expression, inside a loop) for every executable expression."""
    if isinstance(s, Seq):
        for c in s.stmts:
            yield from _executable_exprs(c, in_loop)
    elif isinstance(s, VarDecl):
        if not s.ghost:
            yield s, s.init, in_loop
    elif isinstance(s, Assign):
        yield s, s.value, in_loop
    elif isinstance(s, ArrayStore):
        yield s, s.index, in_loop
        yield s, s.value, in_loop
    elif isinstance(s, If):
        yield s, s.cond, in_loop
        yield from _executable_exprs(s.then, in_loop)
        yield from _executable_exprs(s.orelse, in_loop)
    elif isinstance(s, While):
        yield s, s.cond, in_loop
        yield from _executable_exprs(s.body, True)
    elif isinstance(s, Return):
        yield s, s.value, in_loop
    elif isinstance(s, CallStmt):
        for a in s.args:
            yield s, a, in_loop
    # GhostAssign, Assert, Skip: specification positions


def _where(s: Stmt) -> str:
    sp = getattr(s, "span", None)
    return str(sp) if sp is not None else "?"


def _heavy(e: Expr, env) -> list[Expr]:
    out = []
    for x in subexprs(e):
        if isinstance(x, (Quant, Store)):
            out.append(x)
        elif isinstance(x, Binary) and x.op in ("=", "!=") and _is_array(x.left, env):
            out.append(x)
    return out


def _is_array(e: Expr, env) -> bool:
    if isinstance(e, Var):
        return env.get(e.name) == Type.ARRAY
    if isinstance(e, (ArrayLit, Store)):
        return True
    return isinstance(e, Apply) and e.fn == "take"


def _non_constant(e: Expr, env) -> bool:
    return any(isinstance(x, Apply) for x in subexprs(e)) or bool(_heavy(e, env))


def check_imperativeness(m: MethodDecl) -> JudgeVerdict:
    env = method_env(m)
    found: list[Violation] = []
    straight: dict[str, list[Expr]] = {}
    for s, e, in_loop in _executable_exprs(m.body):
        for x in subexprs(e):
            if isinstance(x, Apply):
                found.append(Violation(_where(s), "R1", expr_str(x)))
        for x in _heavy(e, env):
            found.append(Violation(_where(s), "R3", expr_str(x)))
        if not in_loop and isinstance(s, (VarDecl, Assign)):
            straight.setdefault(s.name, []).append(e)
    for s, e, in_loop in _executable_exprs(m.body):
        if isinstance(s, Return) and not in_loop and _result_from_one_expression(e, straight, env):
            found.append(Violation(_where(s), "R2", expr_str(e)))
    seen, unique = set(), []
    for v in found:
        if v not in seen:
            seen.add(v)
            unique.append(v)
    return JudgeVerdict(tuple(unique))


def _result_from_one_expression(e: Expr, straight: dict, env) -> bool:
    """Does the returned value trace back, outside loops, to a non-constant expression?"""
    todo, seen = [e], set()
    while todo:
        x = todo.pop()
        if _non_constant(x, env):
            return True
        for v in free_vars(x):
            if v not in seen:
                seen.add(v)
                todo.extend(straight.get(v, []))
    return False
