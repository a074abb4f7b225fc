"""Recursive-descent parser for ``.wyv`` sources (grammar in docs/grammar.md)."""

from __future__ import annotations

from ..errors import ContractError, ParseError
from .ast import (
    Apply, ArrayLit, ArrayStore, Assert, Assign, Binary, BoolLit, CallStmt, Expr,
    GhostAssign, If, Index, IntLit, Length, MethodDecl, Param, Program, Quant, Return,
    Seq, Skip, Span, Stmt, Store, Type, Unary, Var, VarDecl, While,
)
from .lexer import Token, tokenize

_CMP = ("=", "!=", "<", "<=", ">", ">=")


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.pos = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, expected=()) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(f"{message}, found {found}", t.line, t.col, frozenset(expected))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}", {text})
        return self.advance()

    def ident(self) -> str:
        if self.tok.kind != "ident":
            raise self.error("expected identifier", {"identifier"})
        return self.advance().text

    def span(self) -> Span:
        return Span(self.tok.line, self.tok.col)

    # -- declarations
    def program(self) -> Program:
        methods = []
        while self.tok.kind != "eof":
            methods.append(self.method())
        if not methods:
            raise self.error("expected a method declaration", {"method"})
        return Program(tuple(methods))

    def method(self) -> MethodDecl:
        span = self.span()
        self.expect("method")
        name = self.ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.param())
            while self.at(","):
                self.advance()
                params.append(self.param())
        self.expect(")")
        self.expect("returns")
        self.expect("(")
        ret = self.param()
        self.expect(")")
        requires, ensures = [], []
        while self.at("requires", "ensures"):
            kw = self.advance().text
            (requires if kw == "requires" else ensures).append(self.expr())
        self.expect("do")
        body = self.stmts(terminators=("method",))
        return MethodDecl(name, tuple(params), ret, tuple(requires), tuple(ensures), body, span)

    def param(self) -> Param:
        name = self.ident()
        self.expect(":")
        return Param(name, self.type())

    def type(self) -> Type:
        if self.at("Int"):
            self.advance()
            return Type.INT
        if self.at("Bool"):
            self.advance()
            return Type.BOOL
        if self.at("Array"):
            self.advance()
            self.expect("Int")
            return Type.ARRAY
        raise self.error("expected a type", {"Int", "Bool", "Array"})

    # -- statements
    def stmts(self, terminators: tuple[str, ...]) -> Seq:
        span = self.span()
        out: list[Stmt] = []
        while not (self.tok.kind == "eof" or self.at(*terminators)):
            out.append(self.stmt())
            while self.at(";"):
                self.advance()
        return Seq(tuple(out), span)

    def block(self) -> Seq:
        self.expect("{")
        body = self.stmts(terminators=("}",))
        self.expect("}")
        return body

    def stmt(self) -> Stmt:
        span = self.span()
        t = self.tok
        if self.at("skip"):
            self.advance()
            return Skip(span)
        if self.at("let"):
            return self.let(span, ghost=False)
        if self.at("ghost"):
            self.advance()
            if self.at("let"):
                return self.let(span, ghost=True)
            name = self.ident()
            self.expect(":=")
            return GhostAssign(name, self.expr(), span)
        if self.at("if"):
            return self.if_stmt()
        if self.at("while"):
            return self.while_stmt()
        if self.at("return"):
            self.advance()
            return Return(self.expr(), span)
        if self.at("assert"):
            self.advance()
            return Assert(self.expr(), span)
        if t.kind == "ident":
            name = self.advance().text
            if self.at("["):
                self.advance()
                idx = self.expr()
                self.expect("]")
                self.expect(":=")
                return ArrayStore(name, idx, self.expr(), span)
            self.expect(":=")
            if self.at("call"):
                self.advance()
                callee = self.ident()
                return CallStmt(name, callee, self.args(), span)
            return Assign(name, self.expr(), span)
        raise self.error("expected a statement",
                         {"skip", "let", "ghost", "if", "while", "return", "assert", "identifier"})

    def let(self, span: Span, ghost: bool) -> VarDecl:
        self.expect("let")
        mutable = False
        if self.at("mut"):
            self.advance()
            mutable = True
        name = self.ident()
        self.expect(":=")
        return VarDecl(name, self.expr(), mutable, ghost, span)

    def if_stmt(self) -> If:
        span = self.span()
        self.expect("if")
        cond = self.expr()
        then = self.block()
        orelse: Stmt = Seq(())
        if self.at("else"):
            self.advance()
            orelse = self.if_stmt() if self.at("if") else self.block()
        return If(cond, then, orelse, span)

    def while_stmt(self) -> While:
        span = self.span()
        self.expect("while")
        cond = self.expr()
        invariants: list[tuple[str, Expr]] = []
        decreasing: list[Expr] = []
        while self.at("invariant", "decreasing"):
            clause = self.span()
            if self.advance().text == "invariant":
                if self.tok.kind == "ident" and self.peek().kind == "op" and self.peek().text == ":":
                    name = self.advance().text
                    self.advance()
                else:
                    self.expr()
                    raise ContractError("loop invariant must be named (invariant NAME : formula)", clause)
                invariants.append((name, self.expr()))
            else:
                decreasing.append(self.expr())
                if len(decreasing) > 1:
                    raise ContractError("loop has more than one decreasing clause", clause)
        if not decreasing:
            raise ContractError("loop has no decreasing clause", span)
        return While(cond, tuple(invariants), decreasing[0], self.block(), span)

    def args(self) -> tuple[Expr, ...]:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.expr())
            while self.at(","):
                self.advance()
                out.append(self.expr())
        self.expect(")")
        return tuple(out)

    # -- expressions, lowest precedence first
    def expr(self) -> Expr:
        left = self.disj()
        if self.at("==>", "->"):
            self.advance()
            return Binary("==>", left, self.expr())
        return left

    def disj(self) -> Expr:
        e = self.conj()
        while self.at("||"):
            self.advance()
            e = Binary("||", e, self.conj())
        return e

    def conj(self) -> Expr:
        e = self.cmp()
        while self.at("&&"):
            self.advance()
            e = Binary("&&", e, self.cmp())
        return e

    def cmp(self) -> Expr:
        e = self.additive()
        if self.at(*_CMP):
            op = self.advance().text
            e = Binary(op, e, self.additive())
            if self.at(*_CMP):
                raise self.error("comparisons do not chain; add parentheses")
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while self.at("+", "-"):
            op = self.advance().text
            e = Binary(op, e, self.multiplicative())
        return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while self.at("*", "div", "mod"):
            op = self.advance().text
            e = Binary(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            self.advance()
            if self.tok.kind == "int":
                return self.postfix(IntLit(-int(self.advance().text)))
            return Unary("-", self.unary())
        if self.at("!"):
            self.advance()
            return Unary("!", self.unary())
        return self.postfix(self.atom())

    def postfix(self, e: Expr) -> Expr:
        while True:
            if self.at("["):
                self.advance()
                idx = self.expr()
                self.expect("]")
                e = Index(e, idx)
            elif self.at(".") and self.peek().kind == "ident" and self.peek().text == "size":
                self.advance()
                self.advance()
                e = Length(e)
            else:
                return e

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return IntLit(int(t.text))
        if self.at("true", "false"):
            self.advance()
            return BoolLit(t.text == "true")
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("["):
            self.advance()
            elems = []
            if not self.at("]"):
                elems.append(self.expr())
                while self.at(","):
                    self.advance()
                    elems.append(self.expr())
            self.expect("]")
            return ArrayLit(tuple(elems))
        if self.at("store"):
            self.advance()
            args = self.args()
            if len(args) != 3:
                raise self.error("store takes three arguments")
            return Store(*args)
        if self.at("forall", "exists"):
            return self.quant()
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                return Apply(t.text, self.args())
            return Var(t.text)
        raise self.error("expected an expression",
                         {"integer", "true", "false", "(", "[", "identifier", "forall", "exists"})

    def quant(self) -> Quant:
        kind = self.advance().text
        binders = [self.binder()]
        while True:
            if self.at("::"):
                self.advance()
                break
            self.expect(",")
            nxt = self.peek()
            if self.tok.kind == "ident" and nxt.kind == "op" and nxt.text in (",", ":", "::"):
                binders.append(self.binder())
                continue
            break
        return Quant(kind, tuple(binders), self.expr())

    def binder(self) -> tuple[str, Type]:
        name = self.ident()
        if self.at(":"):
            self.advance()
            return name, self.type()
        return name, Type.INT


def parse_program(source: str, check: bool = True) -> Program:
    p = Parser(source)
    prog = p.program()
    if check:
        from .check import check_program

        check_program(prog)
    return prog


def parse_method(source: str, check: bool = True, program: Program | None = None) -> MethodDecl:
    """Parse exactly one method. ``program`` supplies callees for type checking."""
    p = Parser(source)
    m = p.method()
    if p.tok.kind != "eof":
        raise p.error("expected end of input", {"end of input"})
    if check:
        from .check import check_method

        check_method(m, program)
    return m


def parse_formula(source: str) -> Expr:
    p = Parser(source)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error("expected end of formula", {"end of input"})
    return e


def parse_stmts(source: str) -> Seq:
    p = Parser(source)
    body = p.stmts(terminators=())
    return body
