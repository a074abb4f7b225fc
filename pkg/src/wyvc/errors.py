from __future__ import annotations


class WyvError(Exception):
    """Base class for every error raised by wyvc."""


class ParseError(WyvError):
    def __init__(self, message: str, line: int, col: int, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{line}:{col}: {message}{detail}")


class WyvTypeError(WyvError):
    def __init__(self, message: str, span=None):
        self.span = span
        where = f"{span}: " if span is not None else ""
        super().__init__(f"{where}{message}")


class ContractError(WyvError):
    def __init__(self, message: str, span=None):
        self.span = span
        where = f"{span}: " if span is not None else ""
        super().__init__(f"{where}{message}")


class EvalError(WyvError):
    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)


class UnsupportedConstruct(WyvError):
    pass


class EncodingError(WyvError):
    def __init__(self, construct: str):
        self.construct = construct
        super().__init__(f"cannot encode {construct}")


class DomainExhausted(WyvError):
    pass


class LemmaRefuted(WyvError):
    def __init__(self, name: str, counterexample: dict):
        self.name = name
        self.counterexample = counterexample
        super().__init__(f"lemma {name} refuted by {counterexample}")


class EditRejected(WyvError):
    def __init__(self, reasons: list[tuple[object, str]]):
        self.reasons = list(reasons)
        super().__init__("; ".join(r for _, r in self.reasons) or "edit rejected")


class AgentTimeout(WyvError):
    pass


class MalformedResponse(WyvError):
    pass
