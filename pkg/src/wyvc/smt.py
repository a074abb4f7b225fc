"""SMT-LIB v2 encoding of obligations and a child-process solver driver.

Encoding choices:

* user variables are prefixed ``u_``; every array variable ``a`` becomes
  an ``(Array Int Int)`` symbol ``u_a`` plus a length symbol ``len_a >= 0``;
* array-valued expressions are carried as (array term, length term) pairs,
  so ``take`` only changes the length and ``store`` only the contents;
* spec functions become front-recursive ``define-fun-rec`` windows;
* library lemmas are asserted as *ground instances*. Each lemma's trigger
  (its first spec-function application) is matched against the ground
  terms of the negated goal, and matching instances are asserted. Asserting
  the quantified lemma instead makes z3 loop on satisfiable goals, which
  would hide counterexamples.
"""

from __future__ import annotations

import itertools
import os
import re
import select
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from . import speclib
from .errors import EncodingError, LemmaRefuted, WyvError
from .semantics import QuantBounds, eval_batch, eval_formula
from .speclib import DEFAULT_LIBRARY, Lemma, SpecLibraryConfig
from .syntax.ast import (
    Apply, ArrayLit, Binary, BoolLit, Expr, Index, IntLit, Length, Quant, Store, Type,
    Unary, Var, conj, free_vars, implies,
)
from .syntax.printer import expr_str
from .vcgen import Obligation, refutation, spine, substitute_many

DEFAULT_TIMEOUT_MS = 10_000
LOGIC = "ALL"

# ------------------------------------------------------------------ types


def _type(e: Expr, env: Mapping[str, Type]) -> Type:
    if isinstance(e, IntLit):
        return Type.INT
    if isinstance(e, BoolLit):
        return Type.BOOL
    if isinstance(e, Var):
        if e.name not in env:
            raise EncodingError(f"unbound variable {e.name}")
        return env[e.name]
    if isinstance(e, (ArrayLit, Store)):
        return Type.ARRAY
    if isinstance(e, Unary):
        return Type.INT if e.op == "-" else Type.BOOL
    if isinstance(e, Binary):
        return Type.INT if e.op in ("+", "-", "*", "div", "mod") else Type.BOOL
    if isinstance(e, (Index, Length)):
        return Type.INT
    if isinstance(e, Apply):
        fn = speclib.FUNCTIONS.get(e.fn)
        if fn is None:
            raise EncodingError(f"unknown function {e.fn}")
        return fn.ret_type
    if isinstance(e, Quant):
        return Type.BOOL
    raise EncodingError(type(e).__name__)


# --------------------------------------------------------------- encoding


def _sym(name: str) -> str:
    return f"u_{name}"


def _len(name: str) -> str:
    return f"len_{name}"


def _int(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


class _Encoder:
    def __init__(self, env: Mapping[str, Type]):
        self.env = dict(env)
        self.used_fns: set[str] = set()
        self._k = 0
        # z3's recursive-function unfolding stalls when a window bound is an
        # ite term, so top-level clamped lengths get their own constants.
        self.clamps: dict[str, str] = {}

    def clamp(self, n: str, length: str, env) -> str:
        term = f"(clampLen {n} {length})"
        if env is not self.env:
            return term
        if term not in self.clamps:
            self.clamps[term] = f"clamp!{len(self.clamps)}"
        return self.clamps[term]

    def clamp_lines(self) -> list[str]:
        out = []
        for term, c in self.clamps.items():
            out += [f"(declare-const {c} Int)", f"(assert (= {c} {term}))"]
        return out

    def arr(self, e: Expr, env) -> tuple[str, str]:
        if isinstance(e, Var):
            if env.get(e.name) != Type.ARRAY:
                raise EncodingError(f"{e.name} is not an array")
            return _sym(e.name), _len(e.name)
        if isinstance(e, Store):
            a, n = self.arr(e.arr, env)
            return f"(store {a} {self.enc(e.idx, env)} {self.enc(e.val, env)})", n
        if isinstance(e, ArrayLit):
            body = "((as const (Array Int Int)) 0)"
            for k, x in enumerate(e.elems):
                body = f"(store {body} {k} {self.enc(x, env)})"
            return body, str(len(e.elems))
        if isinstance(e, Apply) and e.fn == "take":
            a, n = self.arr(e.args[0], env)
            return a, self.clamp(self.enc(e.args[1], env), n, env)
        raise EncodingError(f"array expression {expr_str(e)}")

    def enc(self, e: Expr, env: Optional[Mapping[str, Type]] = None) -> str:
        env = self.env if env is None else env
        if isinstance(e, IntLit):
            return _int(e.value)
        if isinstance(e, BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, Var):
            t = env.get(e.name)
            if t is None:
                raise EncodingError(f"unbound variable {e.name}")
            if t == Type.ARRAY:
                raise EncodingError(f"array {e.name} used as a scalar")
            return _sym(e.name)
        if isinstance(e, Unary):
            return f"({'-' if e.op == '-' else 'not'} {self.enc(e.arg, env)})"
        if isinstance(e, Binary):
            if e.op in ("=", "!=") and _type(e.left, env) == Type.ARRAY:
                eq = self.arr_eq(e.left, e.right, env)
                return eq if e.op == "=" else f"(not {eq})"
            op = {"&&": "and", "||": "or", "==>": "=>", "!=": "distinct"}.get(e.op, e.op)
            return f"({op} {self.enc(e.left, env)} {self.enc(e.right, env)})"
        if isinstance(e, Index):
            a, _ = self.arr(e.arr, env)
            return f"(select {a} {self.enc(e.idx, env)})"
        if isinstance(e, Length):
            return self.arr(e.arr, env)[1]
        if isinstance(e, Apply):
            fn = speclib.FUNCTIONS.get(e.fn)
            if fn is None or fn.smt_name is None:
                raise EncodingError(f"function {e.fn} in scalar position")
            self.used_fns.add(fn.smt_name)
            a, n = self.arr(e.args[0], env)
            if e.fn == "sortedUpTo":
                return f"({fn.smt_name} {a} 0 {self.clamp(self.enc(e.args[1], env), n, env)})"
            extra = "".join(" " + self.enc(x, env) for x in e.args[1:])
            return f"({fn.smt_name} {a} 0 {n}{extra})"
        if isinstance(e, Quant):
            inner = dict(env)
            decls, guards = [], []
            for name, t in e.binders:
                inner[name] = t
                if t == Type.ARRAY:
                    decls += [f"({_sym(name)} (Array Int Int))", f"({_len(name)} Int)"]
                    guards.append(f"(>= {_len(name)} 0)")
                else:
                    decls.append(f"({_sym(name)} {t.value})")
            body = self.enc(e.body, inner)
            if guards:
                g = guards[0] if len(guards) == 1 else f"(and {' '.join(guards)})"
                body = f"(=> {g} {body})" if e.kind == "forall" else f"(and {g} {body})"
            return f"({e.kind} ({' '.join(decls)}) {body})"
        raise EncodingError(type(e).__name__)

    def arr_eq(self, a: Expr, b: Expr, env) -> str:
        x, n = self.arr(a, env)
        y, m = self.arr(b, env)
        self._k += 1
        k = f"w!{self._k}"
        return (f"(and (= {n} {m}) (forall (({k} Int)) (=> (and (<= 0 {k}) (< {k} {n})) "
                f"(= (select {x} {k}) (select {y} {k})))))")


# ------------------------------------------------------ lemma instances


def _ground_terms(e: Expr) -> list[Expr]:
    """Subterms of ``e`` outside quantifier bodies, in preorder."""
    out = [e]
    if isinstance(e, Quant):
        return out
    for c in _children(e):
        out += _ground_terms(c)
    return out


def _children(e: Expr) -> list[Expr]:
    if isinstance(e, Unary):
        return [e.arg]
    if isinstance(e, Binary):
        return [e.left, e.right]
    if isinstance(e, Index):
        return [e.arr, e.idx]
    if isinstance(e, Length):
        return [e.arr]
    if isinstance(e, Store):
        return [e.arr, e.idx, e.val]
    if isinstance(e, (Apply,)):
        return list(e.args)
    if isinstance(e, ArrayLit):
        return list(e.elems)
    return []


def lemma_trigger(lemma: Lemma) -> Expr:
    """First spec-function application (other than ``take``) in the lemma's conclusion."""
    goal = spine(lemma.formula).goal
    for t in _ground_terms(goal):
        if isinstance(t, Apply) and t.fn != "take":
            return t
    raise EncodingError(f"lemma {lemma.name} has no trigger term")


def _match(pat: Expr, term: Expr, binders: Mapping[str, Type], env, binding: dict) -> Optional[dict]:
    if isinstance(pat, Var) and pat.name in binders:
        if _type(term, env) != binders[pat.name]:
            return None
        if pat.name in binding:
            return binding if binding[pat.name] == term else None
        return {**binding, pat.name: term}
    if (isinstance(pat, Binary) and pat.op == "+" and isinstance(pat.left, Var)
            and pat.left.name in binders and isinstance(pat.right, IntLit)):
        if isinstance(term, Binary) and term.op == "+" and term.right == pat.right:
            return _match(pat.left, term.left, binders, env, binding)
        if _type(term, env) != Type.INT:
            return None
        # solve x + c = term for x
        return _match(pat.left, Binary("-", term, pat.right), binders, env, binding)
    if type(pat) is not type(term):
        return None
    if isinstance(pat, (IntLit, BoolLit, Var)):
        return binding if pat == term else None
    if isinstance(pat, (Apply, Unary, Binary)) and getattr(pat, "fn", None) != getattr(term, "fn", None):
        return None
    if isinstance(pat, (Unary, Binary)) and pat.op != term.op:
        return None
    pk, tk = _children(pat), _children(term)
    if len(pk) != len(tk):
        return None
    for p, t in zip(pk, tk):
        binding = _match(p, t, binders, env, binding)
        if binding is None:
            return None
    return binding


def lemma_instances(lemmas: Iterable[Lemma], formulas: Iterable[Expr],
                    env: Mapping[str, Type]) -> list[tuple[str, Expr]]:
    terms: list[Expr] = []
    seen: set[Expr] = set()
    for f in formulas:
        for t in _ground_terms(f):
            if isinstance(t, Apply) and t not in seen and free_vars(t) <= set(env):
                seen.add(t)
                terms.append(t)
    out: list[tuple[str, Expr]] = []
    done: set[str] = set()
    for lemma in lemmas:
        sp = spine(lemma.formula)
        binders = dict(sp.binders)
        trigger = lemma_trigger(lemma)
        body = implies(conj(list(sp.hyps)), sp.goal)
        for t in terms:
            b = _match(trigger, t, binders, env, {})
            if b is None or set(b) != set(binders):
                continue
            inst = substitute_many(body, b)
            key = lemma.name + "|" + expr_str(inst)
            if key not in done:
                done.add(key)
                out.append((lemma.name, inst))
    return out


# ---------------------------------------------------------------- scripts


SMALL_LEN, SMALL_INT = 4, 8  # bounds for counterexample shrinking


@dataclass(frozen=True)
class SmtScript:
    """One validity query, renderable in two encodings.

    ``text`` declares spec functions as uninterpreted symbols and asserts a
    bounded number of ground unfoldings of their definitions; unsat there is
    fast and trustworthy, but a sat model may be spurious. ``recursive_text``
    uses the recursive definitions instead, whose models are exact.
    """

    name: str
    logic: str
    declarations: tuple[str, ...]
    definitions: tuple[str, ...]
    lemma_assertions: tuple[str, ...]
    goal: str
    binders: tuple[tuple[str, Type], ...] = ()
    function_decls: tuple[str, ...] = ()
    unfoldings: tuple[str, ...] = ()
    negation: Optional[Expr] = field(default=None, compare=False)

    def _render(self, defs, extra) -> str:
        lines = [f"; obligation {self.name}",
                 "(set-option :produce-models true)",
                 "(set-option :random-seed 0)",
                 f"(set-logic {self.logic})"]
        lines += defs
        lines += self.declarations
        lines += self.lemma_assertions
        lines += extra
        lines.append(self.goal)
        lines.append("(check-sat)")
        return "\n".join(lines) + "\n"

    @property
    def text(self) -> str:
        return self._render(self.definitions[:1] + self.function_decls, self.unfoldings)

    @property
    def recursive_text(self) -> str:
        return self._render(self.definitions, ())

    def bounded_text(self, max_len: int = SMALL_LEN, bound: int = SMALL_INT) -> str:
        """The first encoding with every binder kept small, to shrink counterexamples."""
        extra = []
        for n, t in self.binders:
            if t == Type.INT:
                extra.append(f"(assert (<= (- {bound}) {_sym(n)} {bound}))")
            elif t == Type.ARRAY:
                extra.append(f"(assert (<= {_len(n)} {max_len}))")
                extra += [f"(assert (<= (- {bound}) (select {_sym(n)} {k}) {bound}))" for k in range(max_len)]
        return self._render(self.definitions[:1] + self.function_decls, self.unfoldings + tuple(extra))


_CLAMP = "(define-fun clampLen ((n Int) (len Int)) Int (ite (< n 0) 0 (ite (> n len) len n)))"
UNFOLD_FUEL = 2


def _sx(x) -> str:
    return x if isinstance(x, str) else "(" + " ".join(_sx(y) for y in x) + ")"


def _fold(x):
    """Fold (+ n m) / (- n m) over numerals so unfolded terms stay canonical."""
    if isinstance(x, list):
        x = [_fold(y) for y in x]
        if len(x) == 3 and x[0] in ("+", "-") and all(isinstance(y, str) and y.isdigit() for y in x[1:]):
            v = int(x[1]) + int(x[2]) if x[0] == "+" else int(x[1]) - int(x[2])
            return str(v) if v >= 0 else ["-", str(-v)]
    return x


def _subst(x, sub: Mapping[str, object]):
    if isinstance(x, str):
        return sub.get(x, x)
    return [_subst(y, sub) for y in x]


_BINDERS = ("forall", "exists", "lambda")


def _ground_apps(x, names: set[str], bound: frozenset, out: list) -> None:
    if isinstance(x, str):
        return
    if x and x[0] in _BINDERS and len(x) == 3:
        inner = bound | {b[0] for b in x[1]}
        _ground_apps(x[2], names, inner, out)
        return
    if x and x[0] == "let" and len(x) == 3:
        for b in x[1]:
            _ground_apps(b[1], names, bound, out)
        _ground_apps(x[2], names, bound | {b[0] for b in x[1]}, out)
        return
    if x and isinstance(x[0], str) and x[0] in names and not (_symbols(x) & bound):
        out.append(x)
    for y in x:
        _ground_apps(y, names, bound, out)


def _symbols(x) -> set:
    if isinstance(x, str):
        return {x}
    out: set = set()
    for y in x:
        out |= _symbols(y)
    return out


def _unfoldings(texts: Iterable[str], fns: Iterable[str], fuel: int = UNFOLD_FUEL) -> list[str]:
    """Ground instances of each recursive definition at the terms that occur."""
    defs = {}
    for fn in fns:
        d = parse_sexprs(_SMT_DEFS_BY_NAME[fn])[0]
        defs[fn] = ([p[0] for p in d[2]], d[4])
    frontier: list = []
    for t in texts:
        for form in parse_sexprs(t):
            _ground_apps(form, set(defs), frozenset(), frontier)
    seen: set[str] = set()
    out = []
    for _ in range(fuel):
        nxt: list = []
        for term in frontier:
            term = _fold(term)
            key = _sx(term)
            if key in seen:
                continue
            seen.add(key)
            params, body = defs[term[0]]
            inst = _fold(_subst(body, dict(zip(params, term[1:]))))
            out.append(f"(assert (= {key} {_sx(inst)}))")
            _ground_apps(inst, set(defs), frozenset(), nxt)
        frontier = nxt
    return out


def _signature(fn: str) -> str:
    d = parse_sexprs(_SMT_DEFS_BY_NAME[fn])[0]
    return f"(declare-fun {fn} ({' '.join(_sx(p[1]) for p in d[2])}) {_sx(d[3])})"


_SMT_DEFS_BY_NAME = {f.smt_name: f.smt_definition for f in speclib.FUNCTIONS.values() if f.smt_name}


def emit_formula(name: str, formula: Expr, lib: SpecLibraryConfig = DEFAULT_LIBRARY,
                 env: Optional[Mapping[str, Type]] = None) -> SmtScript:
    """Script whose ``unsat`` answer means ``formula`` is valid."""
    ref = refutation(formula)
    scope = dict(env or {})
    scope.update(ref.binders)
    missing = free_vars(ref.negation) - set(scope)
    if missing:
        raise EncodingError(f"free variables {sorted(missing)}")
    enc = _Encoder(scope)
    goal = f"(assert {enc.enc(ref.negation)})"
    lemmas = []
    for lname, inst in lemma_instances(lib.enabled, [ref.negation], scope):
        lemmas.append(f"; lemma {lname}\n(assert {enc.enc(inst)})")
    decls = []
    for n, t in sorted(scope.items()) if env else ref.binders:
        if t == Type.ARRAY:
            decls += [f"(declare-const {_sym(n)} (Array Int Int))", f"(declare-const {_len(n)} Int)",
                      f"(assert (>= {_len(n)} 0))"]
        else:
            decls.append(f"(declare-const {_sym(n)} {t.value})")
    decls += enc.clamp_lines()
    fns = sorted(enc.used_fns)
    defs = [_CLAMP] + [_SMT_DEFS_BY_NAME[fn] for fn in fns]
    unfold = _unfoldings([goal, *lemmas, *decls], fns)
    binders = tuple(sorted(scope.items())) if env else ref.binders
    return SmtScript(name, LOGIC, tuple(decls), tuple(defs), tuple(lemmas), goal, binders,
                     tuple(_signature(fn) for fn in fns), tuple(unfold), ref.negation)


def emit_smtlib(ob: Obligation, lib: SpecLibraryConfig = DEFAULT_LIBRARY) -> SmtScript:
    return emit_formula(ob.name, ob.formula, lib)


# ----------------------------------------------------------------- models


def parse_sexprs(text: str) -> list:
    tokens = re.findall(r'\(|\)|"(?:[^"]|"")*"|\|[^|]*\||[^\s()]+', text)
    stack: list[list] = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


@dataclass(frozen=True)
class _ArrVal:
    fn: object

    def __call__(self, k):
        return self.fn(k)


class _ModelEval:
    def __init__(self, defs: Mapping[str, tuple[list, object]]):
        self.defs = defs

    def call(self, name: str, args: list):
        params, body = self.defs[name]
        return self.ev(body, dict(zip(params, args)))

    def ev(self, s, env: dict):
        if isinstance(s, str):
            if re.fullmatch(r"-?\d+", s):
                return int(s)
            if s == "true":
                return True
            if s == "false":
                return False
            if s in env:
                return env[s]
            if s in self.defs and not self.defs[s][0]:
                return self.call(s, [])
            raise ValueError(f"unknown symbol {s}")
        head = s[0]
        if isinstance(head, list):
            if head[:2] == ["as", "const"]:
                v = self.ev(s[1], env)
                return _ArrVal(lambda k, v=v: v)
            if head[:2] == ["_", "as-array"]:
                fname = head[2]
                return _ArrVal(lambda k, f=fname: self.call(f, [k]))
            raise ValueError(f"cannot evaluate {s}")
        if head == "_" and len(s) == 3 and s[1] == "as-array":
            return _ArrVal(lambda k, f=s[2]: self.call(f, [k]))
        if head == "lambda":
            (pname, _sort), = s[1]
            body = s[2]
            return _ArrVal(lambda k, b=body, p=pname, e=dict(env): self.ev(b, {**e, p: k}))
        if head == "let":
            inner = dict(env)
            for name, val in s[1]:
                inner[name] = self.ev(val, env)
            return self.ev(s[2], inner)
        if head == "ite":
            return self.ev(s[2], env) if self.ev(s[1], env) else self.ev(s[3], env)
        args = [self.ev(x, env) for x in s[1:]]
        if head == "-":
            return -args[0] if len(args) == 1 else args[0] - sum(args[1:])
        if head == "+":
            return sum(args)
        if head == "*":
            out = 1
            for a in args:
                out *= a
            return out
        if head == "div":
            return (args[0] - args[0] % abs(args[1])) // args[1]
        if head == "mod":
            return args[0] % abs(args[1])
        if head == "=":
            return all(a == args[0] for a in args[1:])
        if head == "and":
            return all(args)
        if head == "or":
            return any(args)
        if head == "not":
            return not args[0]
        if head in ("<", "<=", ">", ">="):
            import operator
            op = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}[head]
            return all(op(a, b) for a, b in zip(args, args[1:]))
        if head == "select":
            return args[0](args[1])
        if head == "store":
            base, key, val = args
            return _ArrVal(lambda k, b=base, i=key, v=val: v if k == i else b(k))
        if head in self.defs:
            return self.call(head, args)
        raise ValueError(f"cannot evaluate {head}")


MAX_MODEL_ARRAY = 4096


@dataclass(frozen=True)
class Model:
    """Counterexample values for the obligation's universally bound variables."""

    values: dict
    text: str = ""

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.values.items()}


def parse_model(text: str, binders: Iterable[tuple[str, Type]]) -> Model:
    forms = parse_sexprs(text)
    if len(forms) == 1 and isinstance(forms[0], list) and forms[0] and forms[0][0] != "define-fun":
        forms = forms[0]
    if forms and forms[0] == "model":
        forms = forms[1:]
    defs: dict[str, tuple[list, object]] = {}
    for f in forms:
        if isinstance(f, list) and len(f) == 5 and f[0] == "define-fun":
            defs[f[1]] = ([p[0] for p in f[2]], f[4])
    ev = _ModelEval(defs)
    values: dict = {}
    for name, t in binders:
        sym = _sym(name)
        if t == Type.ARRAY:
            n = ev.call(_len(name), []) if _len(name) in defs else 0
            n = max(0, min(int(n), MAX_MODEL_ARRAY))
            arr = ev.call(sym, []) if sym in defs else _ArrVal(lambda k: 0)
            values[name] = tuple(int(arr(k)) for k in range(n))
        elif sym in defs:
            values[name] = ev.call(sym, [])
        else:
            values[name] = False if t == Type.BOOL else 0
    return Model(values, text)


# ---------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class SolverVerdict:
    kind: str  # Valid | Invalid | Unknown | Timeout | SolverError
    wall_ms: float = 0.0
    model: Optional[Model] = None
    detail: str = ""

    @property
    def valid(self) -> bool:
        return self.kind == "Valid"

    def to_json(self) -> dict:
        out = {"verdict": self.kind, "wallMillis": round(self.wall_ms, 1)}
        if self.model is not None:
            out["model"] = self.model.to_json()
            out["modelText"] = self.model.text
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass(frozen=True)
class SolverConfig:
    path: Optional[str] = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    @classmethod
    def from_env(cls, base: Optional["SolverConfig"] = None) -> "SolverConfig":
        base = base or cls()
        path = os.environ.get("WYVC_SOLVER", base.path)
        t = os.environ.get("WYVC_SOLVER_TIMEOUT_MS")
        return cls(path, int(t) if t else base.timeout_ms)

    def executable(self) -> str:
        path = self.path or shutil.which("z3") or shutil.which("cvc5")
        if not path:
            raise WyvError("no SMT solver found; set WYVC_SOLVER")
        return path


def _solver_argv(path: str, timeout_ms: int) -> list[str]:
    base = os.path.basename(path)
    if base.startswith("cvc5"):
        return [path, "--lang=smt2", "--incremental", f"--tlimit-per={max(timeout_ms, 1)}"]
    if base.startswith("z3"):
        return [path, "-in", "-smt2", f"-t:{max(timeout_ms, 1)}"]
    return [path]


_GRACE_MS = 2000


def _read_until(proc, deadline: float, done) -> tuple[str, bool]:
    """Read solver output until ``done(text)`` holds, EOF, or the deadline passes."""
    fd = proc.stdout.fileno()
    buf = b""
    while True:
        text = buf.decode("utf-8", "replace")
        if done(text):
            return text, True
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return text, False
        ready, _, _ = select.select([fd], [], [], remaining)
        if not ready:
            continue
        chunk = os.read(fd, 65536)
        if not chunk:
            return buf.decode("utf-8", "replace"), True
        buf += chunk


_ANSWER = re.compile(r"^(sat|unsat|unknown)\s*$", re.M)


@dataclass(frozen=True)
class _Answer:
    kind: str  # unsat | sat | unknown | timeout | error
    model: Optional[Model] = None
    detail: str = ""


def _query(text: str, binders, timeout_ms: int, path: str) -> _Answer:
    """One solver process, one check-sat. The process never outlives the call."""
    argv = _solver_argv(path, timeout_ms)
    deadline = time.monotonic() + (timeout_ms + _GRACE_MS) / 1000
    proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                            stderr=subprocess.STDOUT)
    try:
        try:
            proc.stdin.write(text.encode())
            proc.stdin.flush()
        except BrokenPipeError:
            pass
        out, finished = _read_until(proc, deadline, lambda t: _ANSWER.search(t) is not None)
        if not finished:
            return _Answer("timeout", detail="wall-clock deadline")
        m = _ANSWER.search(out)
        errors = [ln for ln in out.splitlines() if ln.startswith("(error")]
        if errors:
            return _Answer("error", detail=errors[0][:500])
        if m is None:
            proc.wait(timeout=1)
            return _Answer("error", detail=f"exit {proc.returncode}: {out.strip()[:500]}")
        answer = m.group(1)
        if answer == "unsat":
            return _Answer("unsat")
        if answer == "sat":
            _send(proc, "(get-model)\n(exit)\n")
            rest, ok = _read_until(proc, deadline, lambda t: False)
            tail = rest.strip()
            if not ok or tail.startswith("(error"):
                return _Answer("sat", Model({}, tail), "model unavailable")
            try:
                return _Answer("sat", parse_model(tail, binders))
            except (ValueError, KeyError, IndexError, TypeError, RecursionError) as exc:
                return _Answer("sat", Model({}, tail), f"unparsed model: {exc}")
        _send(proc, "(get-info :reason-unknown)\n(exit)\n")
        rest, _ = _read_until(proc, deadline, lambda t: False)
        reason = rest.strip()
        rm = re.search(r':reason-unknown\s+"?([^")]*)', reason)
        reason = rm.group(1) if rm else reason or "unknown"
        if "timeout" in reason or "canceled" in reason:
            return _Answer("timeout", detail=reason)
        return _Answer("unknown", detail=reason)
    finally:
        if proc.poll() is None:
            proc.kill()
        proc.wait()
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except (BrokenPipeError, OSError):
                pass


def _shrink(script: SmtScript, model: Model, remaining_ms: float, path: str) -> Model:
    """A replaying model with small values if one exists, else ``model``."""
    if remaining_ms < 50 or not script.binders:
        return model
    small = _query(script.bounded_text(), script.binders, int(min(remaining_ms, 2000)), path)
    if small.kind == "sat" and model_falsifies(script.negation, small.model, script.binders):
        return small.model
    return model


def model_falsifies(negation: Optional[Expr], model: Model, binders,
                    bounds: QuantBounds = QuantBounds()) -> Optional[bool]:
    """Does the model make the negated goal true under the reference semantics?"""
    if negation is None or not model.values:
        return None
    env = {n: model.values.get(n, () if t == Type.ARRAY else (False if t == Type.BOOL else 0))
           for n, t in binders}
    try:
        return bool(eval_formula(negation, env, bounds))
    except WyvError:
        return None


def check_validity(script: SmtScript, timeout_ms: Optional[int] = None,
                   config: Optional[SolverConfig] = None) -> SolverVerdict:
    """Valid on unsat; Invalid only with a model the reference semantics agrees with.

    The uninterpreted encoding runs first. A sat answer whose model does not
    replay is retried, in the remaining time, with the recursive definitions.
    """
    config = SolverConfig.from_env(config)
    timeout_ms = config.timeout_ms if timeout_ms is None else timeout_ms
    path = config.executable()
    start = time.monotonic()
    elapsed = lambda: (time.monotonic() - start) * 1000  # noqa: E731

    first = _query(script.text, script.binders, timeout_ms, path)
    if first.kind == "unsat":
        return SolverVerdict("Valid", elapsed())
    if first.kind == "error":
        return SolverVerdict("SolverError", elapsed(), detail=first.detail)
    if first.kind == "sat" and model_falsifies(script.negation, first.model, script.binders):
        return SolverVerdict("Invalid", elapsed(), _shrink(script, first.model, timeout_ms - elapsed(), path),
                             first.detail)
    if first.kind == "timeout" or not script.function_decls:
        if first.kind == "sat":  # nothing to retry with
            return SolverVerdict("Invalid", elapsed(), first.model, first.detail or "model not replayed")
        kind = "Timeout" if first.kind == "timeout" or elapsed() >= timeout_ms else "Unknown"
        return SolverVerdict(kind, elapsed(), detail=first.detail)

    remaining = int(timeout_ms - elapsed())
    if remaining <= 0:
        return SolverVerdict("Timeout", elapsed(), detail="no time left for the exact encoding")
    second = _query(script.recursive_text, script.binders, remaining, path)
    if second.kind == "unsat":
        return SolverVerdict("Valid", elapsed())
    if second.kind == "sat":
        return SolverVerdict("Invalid", elapsed(), _shrink(script, second.model, timeout_ms - elapsed(), path),
                             second.detail)
    if second.kind == "error":
        return SolverVerdict("SolverError", elapsed(), detail=second.detail)
    why = "uninterpreted model did not replay" if first.kind == "sat" else first.detail
    kind = "Timeout" if second.kind == "timeout" else "Unknown"
    return SolverVerdict(kind, elapsed(), detail=f"{why}; exact encoding: {second.detail}")


def _send(proc, text: str) -> None:
    try:
        proc.stdin.write(text.encode())
        proc.stdin.flush()
        proc.stdin.close()
    except (BrokenPipeError, OSError):
        pass


def check_obligation(ob: Obligation, lib: SpecLibraryConfig = DEFAULT_LIBRARY,
                     timeout_ms: Optional[int] = None,
                     config: Optional[SolverConfig] = None,
                     dump_dir: Optional[str] = None) -> SolverVerdict:
    script = emit_smtlib(ob, lib)
    if dump_dir:
        dump_script(script, dump_dir)
    return check_validity(script, timeout_ms, config)


def dump_script(script: SmtScript, directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, re.sub(r"[^A-Za-z0-9_.-]", "_", script.name) + ".smt2")
    with open(path, "w") as fh:
        fh.write(script.text)
    return path


def confirms_counterexample(ob: Obligation, model: Model,
                            bounds: QuantBounds = QuantBounds()) -> Optional[bool]:
    """Replay a solver model through the reference evaluator.

    True means the model's values really falsify the obligation; None means
    the negated formula could not be evaluated (e.g. an unbounded quantifier).
    """
    ref = refutation(ob.formula)
    return model_falsifies(ref.negation, model, ref.binders, bounds)


# ------------------------------------------------------ library validation


@dataclass
class LibraryReport:
    checked: list[tuple[str, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return True

    def to_json(self) -> dict:
        return {"lemmas": [{"name": n, "cases": c} for n, c in self.checked]}


def _small_first(lo: int, hi: int) -> list[int]:
    return sorted(range(lo, hi + 1), key=lambda v: (abs(v), v >= 0))


def validate_library(lib: SpecLibraryConfig = DEFAULT_LIBRARY, max_len: int = 6,
                     lo: int = -3, hi: int = 3) -> LibraryReport:
    """Check every enabled lemma on all arrays up to ``max_len`` with entries in [lo, hi].

    Integer binders range over [lo - 1, max(hi, max_len) + 1]. States are
    enumerated smallest-magnitude first so counterexamples are minimal.
    """
    import numpy as np

    report = LibraryReport()
    values = _small_first(lo, hi)
    ints = _small_first(lo - 1, max(hi, max_len) + 1)
    for lemma in lib.enabled:
        sp = spine(lemma.formula)
        body = implies(conj(list(sp.hyps)), sp.goal)
        arrays = [n for n, t in sp.binders if t == Type.ARRAY]
        scalars = [(n, t) for n, t in sp.binders if t != Type.ARRAY]
        if len(arrays) > 1:
            raise WyvError(f"lemma {lemma.name}: at most one array binder is supported")
        cases = 0
        lengths = range(max_len + 1) if arrays else [0]
        for n in lengths:
            rows = np.array(list(itertools.product(values, repeat=n)), dtype=np.int64)
            rows = rows.reshape(len(values) ** n, n)
            size = rows.shape[0]
            scalar_ranges = [ints if t == Type.INT else [False, True] for _, t in scalars]
            for combo in itertools.product(*scalar_ranges):
                env: dict = {name: v for (name, _), v in zip(scalars, combo)}
                if arrays:
                    env[arrays[0]] = (rows, np.full(size, n, dtype=np.int64))
                ok, faults = eval_batch(body, env, size)
                bad = ~ok | faults
                cases += size
                if bad.any():
                    k = int(np.argmax(bad))
                    cex = {name: v for (name, _), v in zip(scalars, combo)}
                    if arrays:
                        cex[arrays[0]] = [int(x) for x in rows[k]]
                    if faults[k]:
                        cex["fault"] = True
                    raise LemmaRefuted(lemma.name, cex)
        report.checked.append((lemma.name, cases))
    return report
