"""Lexing, parsing, checking, printing and hashing of the wyv mini-language."""

from .ast import *  # noqa: F401,F403
from .check import method_env, type_of
from .hashing import alpha_normalize, hash_formula, hash_method
from .parser import parse_formula, parse_method, parse_program, parse_stmts
from .printer import expr_str, pretty_print, print_program, stmt_str

__all__ = [
    "alpha_normalize", "expr_str", "hash_formula", "hash_method", "method_env",
    "parse_formula", "parse_method", "parse_program", "parse_stmts", "pretty_print",
    "print_program", "stmt_str", "type_of",
]
