"""Pretty printer producing canonical ``.wyv`` text that parses back to the same AST."""

from __future__ import annotations

from .ast import (
    Apply, ArrayLit, ArrayStore, Assert, Assign, Binary, BoolLit, CallStmt, Expr,
    GhostAssign, If, Index, IntLit, Length, MethodDecl, Program, Quant, Return, Seq,
    Skip, Stmt, Store, Type, Unary, Var, VarDecl, While,
)

# binding strength; higher binds tighter
_PREC = {"==>": 1, "||": 2, "&&": 3,
         "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "div": 6, "mod": 6}
_UNARY = 7
_POSTFIX = 8
_ATOM = 9


def _prec(e: Expr) -> int:
    if isinstance(e, Quant):
        return 0
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _UNARY
    if isinstance(e, IntLit) and e.value < 0:
        return _UNARY
    if isinstance(e, (Index, Length)):
        return _POSTFIX
    return _ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = expr_str(e)
    return f"({s})" if _prec(e) < min_prec else s


def _binder(name: str, t: Type) -> str:
    return name if t == Type.INT else f"{name}: {t}"


def expr_str(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ArrayLit):
        return "[" + ", ".join(expr_str(x) for x in e.elems) + "]"
    if isinstance(e, Unary):
        arg = e.arg
        # keep "-(3)" distinct from the literal -3, and "- -x" from "--" comments
        if e.op == "-" and (isinstance(arg, IntLit) or _prec(arg) < _ATOM):
            return f"-({expr_str(arg)})"
        return f"{e.op}{_wrap(arg, _UNARY)}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        if e.op == "==>":
            left, right = _wrap(e.left, p + 1), _wrap(e.right, p)
        elif p == 4:
            left, right = _wrap(e.left, p + 1), _wrap(e.right, p + 1)
        else:
            left, right = _wrap(e.left, p), _wrap(e.right, p + 1)
        return f"{left} {e.op} {right}"
    if isinstance(e, Index):
        return f"{_wrap(e.arr, _POSTFIX)}[{expr_str(e.idx)}]"
    if isinstance(e, Length):
        return f"{_wrap(e.arr, _POSTFIX)}.size"
    if isinstance(e, Store):
        return f"store({expr_str(e.arr)}, {expr_str(e.idx)}, {expr_str(e.val)})"
    if isinstance(e, Apply):
        return f"{e.fn}(" + ", ".join(expr_str(a) for a in e.args) + ")"
    if isinstance(e, Quant):
        binders = ", ".join(_binder(n, t) for n, t in e.binders)
        return f"{e.kind} {binders}, {expr_str(e.body)}"
    raise TypeError(f"not an expression: {e!r}")


def _block(s: Stmt, indent: int) -> list[str]:
    pad = "  " * indent
    body = s.stmts if isinstance(s, Seq) else (s,)
    lines = ["{"]
    for c in body:
        lines += _stmt(c, indent + 1)
    lines.append(pad + "}")
    return lines


def _stmt(s: Stmt, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(s, Skip):
        return [pad + "skip"]
    if isinstance(s, VarDecl):
        ghost = "ghost " if s.ghost else ""
        mut = "mut " if s.mutable else ""
        return [f"{pad}{ghost}let {mut}{s.name} := {expr_str(s.init)}"]
    if isinstance(s, Assign):
        return [f"{pad}{s.name} := {expr_str(s.value)}"]
    if isinstance(s, GhostAssign):
        return [f"{pad}ghost {s.name} := {expr_str(s.value)}"]
    if isinstance(s, ArrayStore):
        return [f"{pad}{s.name}[{expr_str(s.index)}] := {expr_str(s.value)}"]
    if isinstance(s, Return):
        return [f"{pad}return {expr_str(s.value)}"]
    if isinstance(s, Assert):
        return [f"{pad}assert {expr_str(s.formula)}"]
    if isinstance(s, CallStmt):
        args = ", ".join(expr_str(a) for a in s.args)
        return [f"{pad}{s.target} := call {s.callee}({args})"]
    if isinstance(s, Seq):
        out = []
        for c in s.stmts:
            out += _stmt(c, indent)
        return out
    if isinstance(s, If):
        lines = _block(s.then, indent)
        lines[0] = f"{pad}if {expr_str(s.cond)} " + lines[0]
        if isinstance(s.orelse, If):
            rest = _stmt(s.orelse, indent)
            lines[-1] += " else " + rest[0].lstrip()
            lines += rest[1:]
        elif not (isinstance(s.orelse, Seq) and not s.orelse.stmts):
            rest = _block(s.orelse, indent)
            lines[-1] += " else " + rest[0]
            lines += rest[1:]
        return lines
    if isinstance(s, While):
        lines = [f"{pad}while {expr_str(s.cond)}"]
        for name, f in s.invariants:
            lines.append(f"{pad}  invariant {name} : {expr_str(f)}")
        lines.append(f"{pad}  decreasing {expr_str(s.decreasing)}")
        lines += [pad + x if k == 0 else x for k, x in enumerate(_block(s.body, indent))]
        return lines
    raise TypeError(f"not a statement: {s!r}")


def pretty_print(m: MethodDecl) -> str:
    params = ", ".join(f"{p.name}: {p.type}" for p in m.params)
    lines = [f"method {m.name} ({params}) returns ({m.ret.name}: {m.ret.type})"]
    lines += [f"  requires {expr_str(r)}" for r in m.requires]
    lines += [f"  ensures {expr_str(e)}" for e in m.ensures]
    lines.append("do")
    lines += _stmt(m.body, 1)
    return "\n".join(lines) + "\n"


def print_program(p: Program) -> str:
    return "\n".join(pretty_print(m) for m in p.methods)


def stmt_str(s: Stmt) -> str:
    return "\n".join(_stmt(s, 0))
