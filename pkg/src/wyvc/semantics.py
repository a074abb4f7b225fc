"""Reference big-step interpreter with dynamic contract checking.

This is the executable oracle the verification-condition generator is
tested against, so it deliberately shares no code with ``vcgen``.
"""

from __future__ import annotations

import random
from collections import ChainMap
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

from . import speclib
from .errors import DomainExhausted, EvalError
from .syntax.ast import (
    Apply, ArrayLit, ArrayStore, Assert, Assign, Binary, BoolLit, CallStmt, Expr,
    GhostAssign, If, Index, IntLit, Length, MethodDecl, Program, Quant, Return, Seq,
    Skip, Stmt, Store, Type, Unary, Var, VarDecl, While, split_conjuncts,
)

Value = Union[int, bool, tuple]

VIOLATION_KINDS = frozenset({
    "requires", "ensures", "invariant-entry", "invariant-preservation",
    "decreasing-nonneg", "decreasing-strict", "assert", "bounds", "div-by-zero",
})


def ediv(a: int, b: int) -> int:
    """Euclidean division: the remainder is always nonnegative."""
    return (a - emod(a, b)) // b


def emod(a: int, b: int) -> int:
    return a % abs(b)


@dataclass
class State:
    env: dict[str, Value] = field(default_factory=dict)
    ghost_env: dict[str, Value] = field(default_factory=dict)

    def view(self) -> Mapping[str, Value]:
        return ChainMap(self.env, self.ghost_env)

    def snapshot(self) -> dict[str, Value]:
        return {**self.env, **self.ghost_env}


@dataclass(frozen=True)
class QuantBounds:
    """Finite ranges ``[lo, hi)`` for quantified variables whose guard does not bound them."""

    ranges: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    default: Optional[tuple[int, int]] = None

    def get(self, name: str) -> Optional[tuple[int, int]]:
        return self.ranges.get(name, self.default)


NO_BOUNDS = QuantBounds()


# ------------------------------------------------------------------ outcomes


@dataclass(frozen=True)
class Returned:
    value: Value


@dataclass(frozen=True)
class ContractViolation:
    kind: str
    location: str
    state: dict

    def __post_init__(self):
        assert self.kind in VIOLATION_KINDS, self.kind


@dataclass(frozen=True)
class FuelExhausted:
    pass


@dataclass(frozen=True)
class RunReport:
    outcome: Union[Returned, ContractViolation, FuelExhausted]
    steps: int
    checked_annotations: int

    @property
    def ok(self) -> bool:
        return isinstance(self.outcome, Returned)


# ----------------------------------------------------------------- evaluation


class _Fault(Exception):
    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        self.detail = detail


def _bound_from(conjunct: Expr, name: str, env, bounds) -> tuple[Optional[int], Optional[int]]:
    if not (isinstance(conjunct, Binary) and conjunct.op in ("<", "<=", ">", ">=", "=")):
        return None, None
    op, left, right = conjunct.op, conjunct.left, conjunct.right
    if right == Var(name) and left != Var(name):
        op = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}[op]
        left, right = right, left
    if left != Var(name):
        return None, None
    try:
        v = _eval(right, env, bounds)
    except (_Fault, EvalError, KeyError):
        return None, None
    if isinstance(v, bool) or not isinstance(v, int):
        return None, None
    return {
        "<": (None, v), "<=": (None, v + 1), ">": (v + 1, None), ">=": (v, None), "=": (v, v + 1),
    }[op]


def _guards(kind: str, body: Expr) -> list[Expr]:
    out: list[Expr] = []
    if kind == "forall":
        while isinstance(body, Binary) and body.op == "==>":
            out += split_conjuncts(body.left)
            body = body.right
    else:
        out = split_conjuncts(body)
    return out


def _range_for(name: str, guards: list[Expr], env, bounds: QuantBounds) -> range:
    lo = hi = None
    for g in guards:
        glo, ghi = _bound_from(g, name, env, bounds)
        if glo is not None:
            lo = glo if lo is None else max(lo, glo)
        if ghi is not None:
            hi = ghi if hi is None else min(hi, ghi)
    given = bounds.get(name)
    if given is not None:
        lo = given[0] if lo is None else max(lo, given[0])
        hi = given[1] if hi is None else min(hi, given[1])
    if lo is None or hi is None:
        raise EvalError("unbounded-quantifier", f"no finite range for {name!r}")
    return range(lo, max(lo, hi))


def _quant(e: Quant, env, bounds) -> bool:
    guards = _guards(e.kind, e.body)

    def go(k: int, env) -> bool:
        if k == len(e.binders):
            return _eval(e.body, env, bounds)
        name, t = e.binders[k]
        if t != Type.INT:
            raise EvalError("unbounded-quantifier", f"cannot enumerate {t} variable {name!r}")
        rng = _range_for(name, guards, env, bounds)
        results = (go(k + 1, env.new_child({name: v})) for v in rng)
        return all(results) if e.kind == "forall" else any(results)

    return go(0, ChainMap({}, env))


def _eval(e: Expr, env: Mapping[str, Value], bounds: QuantBounds) -> Value:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError("unbound-variable", e.name) from None
    if isinstance(e, ArrayLit):
        return tuple(_eval(x, env, bounds) for x in e.elems)
    if isinstance(e, Unary):
        v = _eval(e.arg, env, bounds)
        return -v if e.op == "-" else not v
    if isinstance(e, Binary):
        op = e.op
        if op == "&&":
            return bool(_eval(e.left, env, bounds)) and bool(_eval(e.right, env, bounds))
        if op == "||":
            return bool(_eval(e.left, env, bounds)) or bool(_eval(e.right, env, bounds))
        if op == "==>":
            return (not _eval(e.left, env, bounds)) or bool(_eval(e.right, env, bounds))
        a = _eval(e.left, env, bounds)
        b = _eval(e.right, env, bounds)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op in ("div", "mod"):
            if b == 0:
                raise _Fault("div-by-zero", f"{op} by zero")
            return ediv(a, b) if op == "div" else emod(a, b)
        if op == "=":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        raise EvalError("unknown-operator", op)
    if isinstance(e, Index):
        a = _eval(e.arr, env, bounds)
        i = _eval(e.idx, env, bounds)
        if not 0 <= i < len(a):
            raise _Fault("bounds", f"index {i} outside [0, {len(a)})")
        return a[i]
    if isinstance(e, Length):
        return len(_eval(e.arr, env, bounds))
    if isinstance(e, Store):
        a = _eval(e.arr, env, bounds)
        i = _eval(e.idx, env, bounds)
        v = _eval(e.val, env, bounds)
        if not 0 <= i < len(a):
            raise _Fault("bounds", f"store index {i} outside [0, {len(a)})")
        return a[:i] + (v,) + a[i + 1:]
    if isinstance(e, Apply):
        fn = speclib.FUNCTIONS[e.fn]
        return fn.impl(*(_eval(a, env, bounds) for a in e.args))
    if isinstance(e, Quant):
        return _quant(e, env, bounds)
    raise EvalError("unsupported", repr(e))


def eval_formula(f: Expr, s: Union[State, Mapping[str, Value]], bounds: QuantBounds = NO_BOUNDS) -> bool:
    """Truth value of ``f`` in state ``s``.

    Raises EvalError for unbounded quantifiers, unbound variables, and
    out-of-range reads or division by zero inside the formula.
    """
    env = s.view() if isinstance(s, State) else s
    try:
        return bool(_eval(f, env, bounds))
    except _Fault as exc:
        raise EvalError(exc.kind, exc.detail) from None


def eval_expr(e: Expr, env: Mapping[str, Value], bounds: QuantBounds = NO_BOUNDS) -> Value:
    try:
        return _eval(e, env, bounds)
    except _Fault as exc:
        raise EvalError(exc.kind, exc.detail) from None


# ---------------------------------------------------------------- interpreter


class _Violation(Exception):
    def __init__(self, v: ContractViolation):
        self.v = v


class _OutOfFuel(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def _where(stmt, what: str = "") -> str:
    span = getattr(stmt, "span", None)
    at = f" @ {span}" if span is not None else ""
    return f"{what}{at}" if what else (f"line {span}" if span is not None else "?")


class Interpreter:
    def __init__(self, program: Optional[Program], fuel: int, bounds: QuantBounds = NO_BOUNDS):
        self.program = program
        self.fuel = fuel
        self.bounds = bounds
        self.steps = 0
        self.checked = 0

    def run(self, m: MethodDecl, args: list[Value]) -> Value:
        if len(args) != len(m.params):
            raise ValueError(f"{m.name} expects {len(m.params)} arguments")
        state = State(env={p.name: _freeze(a) for p, a in zip(m.params, args)})
        for k, r in enumerate(m.requires, 1):
            self.check(r, state, "requires", f"{m.name}.requires.{k}")
        try:
            self.exec(m.body, state)
        except _Return as ret:
            value = ret.value
        else:  # pragma: no cover - the checker forbids fall-through
            raise EvalError("no-return", m.name)
        post = {p.name: state.env[p.name] for p in m.params}
        post[m.ret.name] = value
        for k, e in enumerate(m.ensures, 1):
            self.check(e, post, "ensures", f"{m.name}.ensures.{k}", snapshot=post)
        return value

    def check(self, f: Expr, state, kind: str, location: str, snapshot=None) -> None:
        self.checked += 1
        view = state.view() if isinstance(state, State) else state
        try:
            ok = eval_formula(f, view, self.bounds)
        except EvalError as exc:
            if exc.kind in ("bounds", "div-by-zero"):
                ok = False
            else:
                raise
        if not ok:
            snap = snapshot if snapshot is not None else state.snapshot()
            raise _Violation(ContractViolation(kind, location, dict(snap)))

    def value(self, e: Expr, state: State, stmt) -> Value:
        try:
            return _eval(e, state.view(), self.bounds)
        except _Fault as exc:
            raise _Violation(ContractViolation(exc.kind, _where(stmt, exc.detail), state.snapshot()))

    def exec(self, s: Stmt, state: State) -> None:
        self.steps += 1
        if isinstance(s, Skip):
            return
        if isinstance(s, Seq):
            for c in s.stmts:
                self.exec(c, state)
            return
        if isinstance(s, VarDecl):
            v = self.value(s.init, state, s)
            (state.ghost_env if s.ghost else state.env)[s.name] = v
            return
        if isinstance(s, Assign):
            state.env[s.name] = self.value(s.value, state, s)
            return
        if isinstance(s, GhostAssign):
            state.ghost_env[s.name] = self.value(s.value, state, s)
            return
        if isinstance(s, ArrayStore):
            a = state.env[s.name]
            i = self.value(s.index, state, s)
            v = self.value(s.value, state, s)
            if not 0 <= i < len(a):
                raise _Violation(ContractViolation(
                    "bounds", _where(s, f"store index {i} outside [0, {len(a)})"), state.snapshot()))
            state.env[s.name] = a[:i] + (v,) + a[i + 1:]
            return
        if isinstance(s, If):
            branch = s.then if self.value(s.cond, state, s) else s.orelse
            # block-local declarations do not outlive the branch
            before = set(state.env), set(state.ghost_env)
            self.exec(branch, state)
            _drop_new(state, before)
            return
        if isinstance(s, While):
            self.loop(s, state)
            return
        if isinstance(s, Return):
            raise _Return(self.value(s.value, state, s))
        if isinstance(s, Assert):
            self.check(s.formula, state, "assert", _where(s, "assert"))
            return
        if isinstance(s, CallStmt):
            callee = self.program.get(s.callee)
            args = [self.value(a, state, s) for a in s.args]
            inner = Interpreter(self.program, self.fuel, self.bounds)
            try:
                result = inner.run(callee, args)
            finally:
                self.fuel = inner.fuel
                self.steps += inner.steps
                self.checked += inner.checked
            state.env[s.target] = result
            return
        raise EvalError("unsupported", type(s).__name__)

    def loop(self, w: While, state: State) -> None:
        names = [n for n, _ in w.invariants]
        first = True
        while True:
            kind = "invariant-entry" if first else "invariant-preservation"
            for name, f in w.invariants:
                self.check(f, state, kind, _where(w, name))
            first = False
            if not self.value(w.cond, state, w):
                return
            d0 = self.measure(w, state)
            if d0 < 0:
                raise _Violation(ContractViolation(
                    "decreasing-nonneg", _where(w, f"decreasing of loop {'/'.join(names)}"),
                    state.snapshot()))
            if self.fuel <= 0:
                raise _OutOfFuel()
            self.fuel -= 1
            before = set(state.env), set(state.ghost_env)
            self.exec(w.body, state)
            _drop_new(state, before)
            d1 = self.measure(w, state)
            self.checked += 1
            if not d1 < d0:
                raise _Violation(ContractViolation(
                    "decreasing-strict", _where(w, f"decreasing of loop {'/'.join(names)}"),
                    state.snapshot()))

    def measure(self, w: While, state: State) -> int:
        self.checked += 1
        try:
            return _eval(w.decreasing, state.view(), self.bounds)
        except _Fault as exc:
            raise _Violation(ContractViolation(exc.kind, _where(w, exc.detail), state.snapshot()))


def _drop_new(state: State, before) -> None:
    env_keys, ghost_keys = before
    for k in set(state.env) - env_keys:
        del state.env[k]
    for k in set(state.ghost_env) - ghost_keys:
        del state.ghost_env[k]


def _freeze(v):
    if isinstance(v, list):
        return tuple(v)
    return v


def eval_method(m: MethodDecl, args: list[Value], fuel: int = 100_000,
                program: Optional[Program] = None, bounds: QuantBounds = NO_BOUNDS) -> RunReport:
    """Run ``m`` on ``args`` checking every contract; ``fuel`` caps total loop iterations."""
    interp = Interpreter(program, fuel, bounds)
    try:
        outcome = Returned(interp.run(m, list(args)))
    except _Violation as exc:
        outcome = exc.v
    except _OutOfFuel:
        outcome = FuelExhausted()
    return RunReport(outcome, interp.steps, interp.checked)


# ---------------------------------------------------------------------- fuzz


@dataclass(frozen=True)
class InputDomain:
    max_len: int = 8
    bound: int = 100
    max_retries: int = 2000
    generators: Mapping[str, Callable[[random.Random], Value]] = field(default_factory=dict)

    def sample(self, m: MethodDecl, rng: random.Random) -> list[Value]:
        out = []
        for p in m.params:
            gen = self.generators.get(p.name)
            if gen is not None:
                out.append(_freeze(gen(rng)))
            elif p.type == Type.INT:
                out.append(rng.randint(-self.bound, self.bound))
            elif p.type == Type.BOOL:
                out.append(rng.random() < 0.5)
            else:
                n = rng.randint(0, self.max_len)
                out.append(tuple(rng.randint(-self.bound, self.bound) for _ in range(n)))
        return out


@dataclass(frozen=True)
class FuzzReport:
    trials: int
    violations: int
    first_counterexample: Optional[dict]
    seed: int

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "violations": self.violations,
            "first_counterexample": self.first_counterexample,
            "seed": self.seed,
        }


def satisfies_requires(m: MethodDecl, args: list[Value], bounds: QuantBounds = NO_BOUNDS) -> bool:
    env = {p.name: a for p, a in zip(m.params, args)}
    try:
        return all(eval_formula(r, env, bounds) for r in m.requires)
    except EvalError as exc:
        if exc.kind in ("bounds", "div-by-zero"):
            return False
        raise


def fuzz_contracts(m: MethodDecl, trials: int = 1000, domain: InputDomain = InputDomain(),
                   seed: int = 0, program: Optional[Program] = None, fuel: int = 100_000,
                   bounds: QuantBounds = NO_BOUNDS) -> FuzzReport:
    """Run ``m`` on ``trials`` seeded random inputs that satisfy its requires clauses."""
    rng = random.Random(seed)
    violations = 0
    first = None
    for _ in range(trials):
        for _attempt in range(domain.max_retries):
            args = domain.sample(m, rng)
            if satisfies_requires(m, args, bounds):
                break
        else:
            raise DomainExhausted(
                f"no input satisfying the requires of {m.name} after {domain.max_retries} draws")
        report = eval_method(m, args, fuel, program, bounds)
        if isinstance(report.outcome, ContractViolation):
            violations += 1
            if first is None:
                first = {
                    "args": {p.name: _jsonable(a) for p, a in zip(m.params, args)},
                    "kind": report.outcome.kind,
                    "location": report.outcome.location,
                }
    return FuzzReport(trials, violations, first, seed)


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


# ---------------------------------------------------------------------------
# Batched evaluation: one quantifier-free formula over many states at once.
# Used for exhaustive checks where the tree-walking evaluator is too slow.
# Arrays in a batch share a column count; their logical length is a vector.


@dataclass
class _BArr:
    data: "object"   # (batch, width) int64
    length: "object"  # (batch,) int64

    def mask(self):
        import numpy as np

        cols = np.arange(self.data.shape[1])
        return cols[None, :] < self.length[:, None]


def eval_batch(f: Expr, env: Mapping[str, object], size: int):
    """Evaluate ``f`` for ``size`` states in parallel.

    ``env`` maps Int/Bool names to scalars or length-``size`` vectors and
    array names to ``(data, lengths)`` pairs. Returns ``(values, faults)``:
    two boolean vectors, ``faults`` marking states where evaluation would
    have raised (bad index, division by zero).
    """
    import numpy as np

    def vec(x, dtype=np.int64):
        a = np.asarray(x)
        return np.broadcast_to(a, (size,)).astype(dtype) if a.ndim == 0 else a.astype(dtype)

    none = np.zeros(size, dtype=bool)

    def ev(e):
        if isinstance(e, IntLit):
            return vec(e.value), none
        if isinstance(e, BoolLit):
            return vec(e.value, bool), none
        if isinstance(e, Var):
            v = env[e.name]
            if isinstance(v, tuple) and len(v) == 2 and np.ndim(v[0]) == 2:
                return _BArr(np.asarray(v[0], dtype=np.int64), vec(v[1])), none
            if isinstance(v, _BArr):
                return v, none
            return vec(v, bool if isinstance(v, bool) or np.asarray(v).dtype == bool else np.int64), none
        if isinstance(e, ArrayLit):
            parts = [ev(x) for x in e.elems]
            data = np.stack([p[0] for p in parts], axis=1) if parts else np.zeros((size, 0), np.int64)
            bad = none.copy()
            for _, b in parts:
                bad |= b
            return _BArr(data, vec(len(parts))), bad
        if isinstance(e, Unary):
            v, bad = ev(e.arg)
            return (-v if e.op == "-" else ~v), bad
        if isinstance(e, Binary):
            a, ba = ev(e.left)
            b, bb = ev(e.right)
            op = e.op
            if op == "&&":
                return a & b, ba | (~ba & a & bb)
            if op == "||":
                return a | b, ba | (~ba & ~a & bb)
            if op == "==>":
                return ~a | b, ba | (~ba & a & bb)
            bad = ba | bb
            if isinstance(a, _BArr):
                same = a.length == b.length
                width = min(a.data.shape[1], b.data.shape[1])
                m = a.mask()[:, :width]
                eq = ((a.data[:, :width] == b.data[:, :width]) | ~m).all(axis=1) & same
                return (eq if op == "=" else ~eq), bad
            if op in ("div", "mod"):
                zero = b == 0
                safe = np.where(zero, 1, b)
                r = np.mod(a, np.abs(safe))
                q = (a - r) // safe
                return (q if op == "div" else r), bad | zero
            fn = {"+": np.add, "-": np.subtract, "*": np.multiply, "=": np.equal,
                  "!=": np.not_equal, "<": np.less, "<=": np.less_equal,
                  ">": np.greater, ">=": np.greater_equal}[op]
            return fn(a, b), bad
        if isinstance(e, Index):
            arr, ba = ev(e.arr)
            i, bi = ev(e.idx)
            oob = (i < 0) | (i >= arr.length)
            width = arr.data.shape[1]
            if width == 0:
                return vec(0), ba | bi | oob
            col = np.clip(i, 0, width - 1)
            return arr.data[np.arange(size), col], ba | bi | oob
        if isinstance(e, Length):
            arr, ba = ev(e.arr)
            return arr.length, ba
        if isinstance(e, Store):
            arr, ba = ev(e.arr)
            i, bi = ev(e.idx)
            v, bv = ev(e.val)
            oob = (i < 0) | (i >= arr.length)
            cols = np.arange(arr.data.shape[1])
            data = np.where(cols[None, :] == i[:, None], v[:, None], arr.data)
            return _BArr(data, arr.length), ba | bi | bv | oob
        if isinstance(e, Apply):
            args = [ev(a) for a in e.args]
            bad = none.copy()
            for _, b in args:
                bad |= b
            vals = [a for a, _ in args]
            return _batch_apply(e.fn, vals, size), bad
        raise EvalError("unsupported", f"batched evaluation of {type(e).__name__}")

    value, faults = ev(f)
    return np.asarray(value, dtype=bool), faults


def _batch_apply(fn: str, args, size: int):
    import numpy as np

    arr = args[0]
    m = arr.mask()
    if fn == "take":
        n = np.clip(args[1], 0, arr.length)
        return _BArr(arr.data, n)
    if fn == "sum":
        return np.where(m, arr.data, 0).sum(axis=1)
    if fn == "count":
        return ((arr.data < args[1][:, None]) & m).sum(axis=1)
    if fn == "occurrences":
        return ((arr.data == args[1][:, None]) & m).sum(axis=1)
    if fn in ("min", "max"):
        if arr.data.shape[1] == 0:
            return np.zeros(size, dtype=np.int64)
        big = np.iinfo(np.int64).max
        if fn == "max":
            r = np.where(m, arr.data, -big).max(axis=1)
        else:
            r = np.where(m, arr.data, big).min(axis=1)
        return np.where(arr.length > 0, r, 0)
    if fn == "sortedUpTo":
        n = np.clip(args[1], 0, arr.length)
        if arr.data.shape[1] < 2:
            return np.ones(size, dtype=bool)
        ok = arr.data[:, :-1] <= arr.data[:, 1:]
        cols = np.arange(arr.data.shape[1] - 1)
        relevant = cols[None, :] + 1 < n[:, None]
        return (ok | ~relevant).all(axis=1)
    raise EvalError("unsupported", f"spec function {fn}")
