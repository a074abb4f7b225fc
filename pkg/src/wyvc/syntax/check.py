"""Type and contract checking for parsed methods."""

from __future__ import annotations

from dataclasses import dataclass

from .. import speclib
from ..errors import ContractError, WyvTypeError
from .ast import (
    Apply, ArrayLit, ArrayStore, Assert, Assign, Binary, BoolLit, CallStmt, Expr,
    GhostAssign, If, Index, IntLit, Length, MethodDecl, Program, Quant, Return, Seq,
    Skip, Stmt, Store, Type, Unary, Var, VarDecl, While, walk,
)

RESERVED_NAMES = frozenset({"dec", "ensures", "call", "assert", "safe", "post"})


@dataclass(frozen=True)
class VarInfo:
    type: Type
    mutable: bool = False
    ghost: bool = False


def type_of(e: Expr, env: dict[str, VarInfo], *, formula: bool, ghost_ok: bool, span=None) -> Type:
    """Infer the type of ``e``.

    ``formula`` admits quantifiers and ``store``; ``ghost_ok`` admits
    reads of ghost variables.
    """

    def go(e: Expr, env) -> Type:
        if isinstance(e, IntLit):
            return Type.INT
        if isinstance(e, BoolLit):
            return Type.BOOL
        if isinstance(e, ArrayLit):
            for x in e.elems:
                want(x, Type.INT, env)
            return Type.ARRAY
        if isinstance(e, Var):
            info = env.get(e.name)
            if info is None:
                raise WyvTypeError(f"unknown variable {e.name!r}", span)
            if info.ghost and not ghost_ok:
                raise WyvTypeError(f"ghost variable {e.name!r} read by executable code", span)
            return info.type
        if isinstance(e, Unary):
            want(e.arg, Type.INT if e.op == "-" else Type.BOOL, env)
            return Type.INT if e.op == "-" else Type.BOOL
        if isinstance(e, Binary):
            if e.op in ("+", "-", "*", "div", "mod"):
                want(e.left, Type.INT, env)
                want(e.right, Type.INT, env)
                return Type.INT
            if e.op in ("<", "<=", ">", ">="):
                want(e.left, Type.INT, env)
                want(e.right, Type.INT, env)
                return Type.BOOL
            if e.op in ("=", "!="):
                want(e.right, go(e.left, env), env)
                return Type.BOOL
            if e.op in ("&&", "||", "==>"):
                want(e.left, Type.BOOL, env)
                want(e.right, Type.BOOL, env)
                return Type.BOOL
            raise WyvTypeError(f"unknown operator {e.op}", span)
        if isinstance(e, Index):
            want(e.arr, Type.ARRAY, env)
            want(e.idx, Type.INT, env)
            return Type.INT
        if isinstance(e, Length):
            want(e.arr, Type.ARRAY, env)
            return Type.INT
        if isinstance(e, Store):
            if not formula:
                raise WyvTypeError("store(...) is only allowed in formulas", span)
            want(e.arr, Type.ARRAY, env)
            want(e.idx, Type.INT, env)
            want(e.val, Type.INT, env)
            return Type.ARRAY
        if isinstance(e, Apply):
            fn = speclib.FUNCTIONS.get(e.fn)
            if fn is None:
                raise WyvTypeError(f"unknown function {e.fn!r}", span)
            if len(e.args) != len(fn.arg_types):
                raise WyvTypeError(f"{e.fn} expects {len(fn.arg_types)} arguments", span)
            for a, t in zip(e.args, fn.arg_types):
                want(a, t, env)
            return fn.ret_type
        if isinstance(e, Quant):
            if not formula:
                raise WyvTypeError("quantifiers are only allowed in formulas", span)
            inner = dict(env)
            for name, t in e.binders:
                inner[name] = VarInfo(t, ghost=False)
            want(e.body, Type.BOOL, inner)
            return Type.BOOL
        raise WyvTypeError(f"unknown expression {e!r}", span)

    def want(e: Expr, t: Type, env) -> None:
        got = go(e, env)
        if got != t:
            raise WyvTypeError(f"expected {t}, got {got}", span)

    return go(e, env)


def _expect(e, t, env, span, *, formula, ghost_ok):
    got = type_of(e, env, formula=formula, ghost_ok=ghost_ok, span=span)
    if got != t:
        raise WyvTypeError(f"expected {t}, got {got}", span)


def _returns_on_all_paths(s: Stmt) -> bool:
    if isinstance(s, Return):
        return True
    if isinstance(s, Seq):
        return bool(s.stmts) and _returns_on_all_paths(s.stmts[-1])
    if isinstance(s, If):
        return _returns_on_all_paths(s.then) and _returns_on_all_paths(s.orelse)
    return False


def _check_return_positions(s: Stmt, final: bool, span) -> None:
    if isinstance(s, Return):
        if not final:
            raise ContractError("return must be the final statement on its path", s.span)
    elif isinstance(s, Seq):
        for k, c in enumerate(s.stmts):
            _check_return_positions(c, final and k == len(s.stmts) - 1, span)
    elif isinstance(s, If):
        _check_return_positions(s.then, final, span)
        _check_return_positions(s.orelse, final, span)
    elif isinstance(s, While):
        _check_return_positions(s.body, False, span)


def check_method(m: MethodDecl, program: Program | None = None) -> None:
    names = [p.name for p in m.params] + [m.ret.name]
    if len(set(names)) != len(names):
        raise ContractError("parameter and return identifiers must be pairwise distinct", m.span)

    params = {p.name: VarInfo(p.type) for p in m.params}
    for r in m.requires:
        _expect(r, Type.BOOL, params, m.span, formula=True, ghost_ok=True)
    post_env = dict(params)
    post_env[m.ret.name] = VarInfo(m.ret.type)
    for e in m.ensures:
        _expect(e, Type.BOOL, post_env, m.span, formula=True, ghost_ok=True)

    _check_return_positions(m.body, True, m.span)
    if not _returns_on_all_paths(m.body):
        raise ContractError("method body must end in return on every path", m.span)

    seen_inv: set[str] = set()
    for w in walk(m.body):
        if isinstance(w, While):
            if not w.invariants:
                # obligation names hang off invariant names
                raise ContractError("loop needs at least one named invariant", w.span)
            local: set[str] = set()
            for name, _ in w.invariants:
                if name in RESERVED_NAMES:
                    raise ContractError(f"invariant name {name!r} is reserved", w.span)
                if name in local or name in seen_inv:
                    raise ContractError(f"duplicate invariant name {name!r}", w.span)
                local.add(name)
            seen_inv |= local

    declared: set[str] = set(params)
    _check_stmt(m.body, dict(params), m, program, declared)


def _check_stmt(s: Stmt, env: dict[str, VarInfo], m: MethodDecl, program, declared: set[str]) -> None:
    sp = getattr(s, "span", None)
    exe = dict(formula=False, ghost_ok=False)
    if isinstance(s, Skip):
        return
    if isinstance(s, Seq):
        for c in s.stmts:
            _check_stmt(c, env, m, program, declared)
        return
    if isinstance(s, VarDecl):
        if s.name in declared:
            raise WyvTypeError(f"variable {s.name!r} is already declared", sp)
        t = type_of(s.init, env, formula=s.ghost, ghost_ok=s.ghost, span=sp)
        if s.name == m.ret.name and t != m.ret.type:
            raise WyvTypeError(f"local {s.name!r} shadows the return value with another type", sp)
        declared.add(s.name)
        env[s.name] = VarInfo(t, s.mutable, s.ghost)
        return
    if isinstance(s, (Assign, GhostAssign, ArrayStore)):
        info = env.get(s.name)
        if info is None:
            raise WyvTypeError(f"assignment to undeclared variable {s.name!r}", sp)
        if not info.mutable:
            raise WyvTypeError(f"assignment to immutable variable {s.name!r}", sp)
        ghost = isinstance(s, GhostAssign)
        if ghost != info.ghost:
            what = "ghost assignment to non-ghost" if ghost else "executable assignment to ghost"
            raise WyvTypeError(f"{what} variable {s.name!r}", sp)
        mode = dict(formula=ghost, ghost_ok=ghost)
        if isinstance(s, ArrayStore):
            if info.type != Type.ARRAY:
                raise WyvTypeError(f"{s.name!r} is not an array", sp)
            _expect(s.index, Type.INT, env, sp, **mode)
            _expect(s.value, Type.INT, env, sp, **mode)
        else:
            _expect(s.value, info.type, env, sp, **mode)
        return
    if isinstance(s, If):
        _expect(s.cond, Type.BOOL, env, sp, **exe)
        _check_stmt(s.then, dict(env), m, program, declared)
        _check_stmt(s.orelse, dict(env), m, program, declared)
        return
    if isinstance(s, While):
        _expect(s.cond, Type.BOOL, env, sp, **exe)
        for _, f in s.invariants:
            _expect(f, Type.BOOL, env, sp, formula=True, ghost_ok=True)
        _expect(s.decreasing, Type.INT, env, sp, formula=True, ghost_ok=True)
        _check_stmt(s.body, dict(env), m, program, declared)
        return
    if isinstance(s, Return):
        _expect(s.value, m.ret.type, env, sp, **exe)
        return
    if isinstance(s, Assert):
        _expect(s.formula, Type.BOOL, env, sp, formula=True, ghost_ok=True)
        return
    if isinstance(s, CallStmt):
        if program is None or s.callee not in program:
            raise WyvTypeError(f"unknown method {s.callee!r}", sp)
        callee = program.get(s.callee)
        if callee is m or _declared_after(program, callee, m):
            raise WyvTypeError(f"{s.callee!r} must be declared before {m.name!r} (no recursion)", sp)
        if len(s.args) != len(callee.params):
            raise WyvTypeError(f"{s.callee} expects {len(callee.params)} arguments", sp)
        for a, p in zip(s.args, callee.params):
            _expect(a, p.type, env, sp, **exe)
        info = env.get(s.target)
        if info is None or not info.mutable or info.ghost:
            raise WyvTypeError(f"call target {s.target!r} must be a mutable local", sp)
        if info.type != callee.ret.type:
            raise WyvTypeError(f"call result has type {callee.ret.type}, target is {info.type}", sp)
        return
    raise WyvTypeError(f"unsupported statement {type(s).__name__}", sp)


def _declared_after(program: Program, a: MethodDecl, b: MethodDecl) -> bool:
    names = [x.name for x in program.methods]
    if b.name not in names:
        return False
    return names.index(a.name) >= names.index(b.name)


def check_program(program: Program) -> None:
    seen = set()
    for m in program.methods:
        if m.name in seen:
            raise ContractError(f"duplicate method {m.name!r}", m.span)
        seen.add(m.name)
        check_method(m, program)


def method_env(m: MethodDecl) -> dict[str, Type]:
    """Flat map of every variable in ``m`` (params, return, locals) to its type."""
    env: dict[str, VarInfo] = {p.name: VarInfo(p.type) for p in m.params}
    out = {p.name: p.type for p in m.params}
    out[m.ret.name] = m.ret.type

    def visit(s: Stmt, env):
        if isinstance(s, Seq):
            for c in s.stmts:
                visit(c, env)
        elif isinstance(s, VarDecl):
            t = type_of(s.init, env, formula=True, ghost_ok=True)
            env[s.name] = VarInfo(t, s.mutable, s.ghost)
            out[s.name] = t
        elif isinstance(s, If):
            visit(s.then, dict(env))
            visit(s.orelse, dict(env))
        elif isinstance(s, While):
            visit(s.body, dict(env))

    visit(m.body, env)
    return out


def ghost_vars(m: MethodDecl) -> set[str]:
    return {s.name for s in walk(m.body) if isinstance(s, VarDecl) and s.ghost}
