"""wyvc: a verifier for a small imperative language with agent-assisted proofs."""

from __future__ import annotations

__version__ = "0.1.0"

from .syntax.parser import parse_program  # noqa: E402
from .vcgen import Obligation, generate_obligations  # noqa: E402

__all__ = ["__version__", "parse_program", "Obligation", "generate_obligations"]
