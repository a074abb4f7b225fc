"""Prover agents: things that take one obligation and answer Success, Fail or Change.

Agents are never trusted. A Success carries a lemma chain that the caller
re-checks with the local solver (``validate_chain``); anything that fails
that check is downgraded to Fail before the orchestrator sees it.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol, Sequence, Union

from .errors import AgentTimeout, MalformedResponse, WyvError
from .smt import SolverConfig, SolverVerdict, check_validity, emit_formula
from .speclib import DEFAULT_LIBRARY, SpecLibraryConfig
from .syntax.ast import Expr, MethodDecl, Program, Stmt, free_vars
from .syntax.parser import parse_formula, parse_stmts
from .syntax.printer import expr_str, pretty_print, stmt_str
from .vcgen import Obligation, spine

# ------------------------------------------------------------------ edits


@dataclass(frozen=True)
class AddInvariant:
    loop: int
    name: str
    formula: Expr
    rationale: str = ""


@dataclass(frozen=True)
class ReplaceInvariant:
    name: str
    formula: Expr
    rationale: str = ""


@dataclass(frozen=True)
class RemoveInvariant:
    name: str
    rationale: str = ""


@dataclass(frozen=True)
class ReplaceDecreasing:
    loop: int
    expr: Expr
    rationale: str = ""


@dataclass(frozen=True)
class RewriteBody:
    loop: int
    body: Stmt
    rationale: str = ""


EditRequest = Union[AddInvariant, ReplaceInvariant, RemoveInvariant, ReplaceDecreasing, RewriteBody]


def edit_to_json(e: EditRequest) -> dict:
    if isinstance(e, AddInvariant):
        body = {"loop": e.loop, "name": e.name, "formula": expr_str(e.formula)}
        key = "add_invariant"
    elif isinstance(e, ReplaceInvariant):
        body, key = {"name": e.name, "formula": expr_str(e.formula)}, "replace_invariant"
    elif isinstance(e, RemoveInvariant):
        body, key = {"name": e.name}, "remove_invariant"
    elif isinstance(e, ReplaceDecreasing):
        body, key = {"loop": e.loop, "expr": expr_str(e.expr)}, "replace_decreasing"
    else:
        body, key = {"loop": e.loop, "body": stmt_str(e.body)}, "rewrite_body"
    if e.rationale:
        body["rationale"] = e.rationale
    return {key: body}


def edit_from_json(d: Mapping) -> EditRequest:
    """Decode ``{"add_invariant": {...}}`` style objects; raises MalformedResponse."""
    if not isinstance(d, Mapping) or len(d) != 1:
        raise MalformedResponse("edit must be an object with exactly one key")
    (key, body), = d.items()
    if not isinstance(body, Mapping):
        raise MalformedResponse(f"{key}: body must be an object")
    why = str(body.get("rationale", ""))
    try:
        if key == "add_invariant":
            return AddInvariant(int(body["loop"]), str(body["name"]), parse_formula(body["formula"]), why)
        if key == "replace_invariant":
            return ReplaceInvariant(str(body["name"]), parse_formula(body["formula"]), why)
        if key == "remove_invariant":
            return RemoveInvariant(str(body["name"]), why)
        if key == "replace_decreasing":
            return ReplaceDecreasing(int(body["loop"]), parse_formula(body["expr"]), why)
        if key == "rewrite_body":
            return RewriteBody(int(body["loop"]), parse_stmts(body["body"]), why)
    except (KeyError, TypeError, ValueError, WyvError) as exc:
        raise MalformedResponse(f"{key}: {exc}") from None
    raise MalformedResponse(f"unknown edit kind {key!r}")


# --------------------------------------------------------------- outcomes


@dataclass(frozen=True)
class LemmaChain:
    lemmas: tuple[Expr, ...] = ()
    note: str = ""

    def to_json(self) -> dict:
        return {"lemmas": [expr_str(x) for x in self.lemmas], "note": self.note}

    @classmethod
    def from_json(cls, d: Mapping) -> "LemmaChain":
        return cls(tuple(parse_formula(x) for x in d.get("lemmas", ())), d.get("note", ""))


@dataclass(frozen=True)
class Success:
    chain: LemmaChain
    calls_used: int = 1
    kind = "Success"


@dataclass(frozen=True)
class Fail:
    reason: str
    calls_used: int = 1
    model: Optional[dict] = None
    kind = "Fail"


@dataclass(frozen=True)
class Change:
    edit: EditRequest
    justification: str = ""
    calls_used: int = 1
    kind = "Change"


ProverOutcome = Union[Success, Fail, Change]


def outcome_to_json(o: ProverOutcome) -> dict:
    out: dict = {"kind": o.kind, "callsUsed": o.calls_used}
    if isinstance(o, Success):
        out["chain"] = o.chain.to_json()
    elif isinstance(o, Fail):
        out["reason"] = o.reason
        if o.model is not None:
            out["model"] = o.model
    else:
        out["edit"] = edit_to_json(o.edit)
        out["justification"] = o.justification
    return out


# ---------------------------------------------------------------- context


@dataclass
class MethodContext:
    method: MethodDecl
    program: Optional[Program] = None
    siblings: tuple[str, ...] = ()
    history: list = field(default_factory=list)
    library: SpecLibraryConfig = DEFAULT_LIBRARY
    solver: Optional[SolverConfig] = None
    timeout_ms: Optional[int] = None


@dataclass(frozen=True)
class TurnBudget:
    turns: int = 1


class Agent(Protocol):
    name: str

    def attempt(self, ob: Obligation, ctx: MethodContext, attempt: int) -> ProverOutcome: ...


# ------------------------------------------------------------- validation


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    solver_calls: int
    detail: str = ""
    verdicts: tuple[SolverVerdict, ...] = ()


def chain_formulas(ob: Obligation, chain: LemmaChain) -> list[tuple[str, Expr]]:
    """The solver queries that certify ``chain`` for ``ob``, in order."""
    sp = spine(ob.formula)
    scope = {n for n, _ in sp.binders}
    out = []
    for k, lemma in enumerate(chain.lemmas):
        stray = free_vars(lemma) - scope
        if stray:
            raise MalformedResponse(f"lemma {k + 1} mentions unknown names {sorted(stray)}")
        out.append((f"{ob.name}.lemma{k + 1}", sp.rebuild(chain.lemmas[:k], lemma)))
    out.append((ob.name, sp.rebuild(chain.lemmas, sp.goal)))
    return out


def validate_chain(ob: Obligation, chain: LemmaChain, ctx: Optional[MethodContext] = None) -> ChainCheck:
    """Check each lemma under the earlier ones, then the goal under all of them.

    Costs ``len(chain.lemmas) + 1`` solver calls when everything passes;
    stops at the first non-Valid step.
    """
    ctx = ctx or MethodContext(method=None)  # type: ignore[arg-type]
    try:
        steps = chain_formulas(ob, chain)
    except MalformedResponse as exc:
        return ChainCheck(False, 0, str(exc))
    verdicts = []
    for name, formula in steps:
        v = check_validity(emit_formula(name, formula, ctx.library), ctx.timeout_ms, ctx.solver)
        verdicts.append(v)
        if not v.valid:
            return ChainCheck(False, len(verdicts), f"{name}: {v.kind} {v.detail}".strip(), tuple(verdicts))
    return ChainCheck(True, len(verdicts), "", tuple(verdicts))


# ----------------------------------------------------------------- agents


class SmtAgent:
    """One solver call, no lemmas."""

    name = "smt"

    def attempt(self, ob: Obligation, ctx: MethodContext, attempt: int = 1) -> ProverOutcome:
        return smt_agent(ob, ctx)


def smt_agent(ob: Obligation, ctx: Optional[MethodContext] = None,
              budget: TurnBudget = TurnBudget()) -> ProverOutcome:
    ctx = ctx or MethodContext(method=None)  # type: ignore[arg-type]
    try:
        v = check_validity(emit_formula(ob.name, ob.formula, ctx.library), ctx.timeout_ms, ctx.solver)
    except WyvError as exc:
        return Fail(f"SolverError: {exc}")
    if v.valid:
        return Success(LemmaChain(note="smt"))
    if v.kind == "Invalid":
        model = v.model.to_json() if v.model is not None else None
        text = v.model.text if v.model is not None else ""
        return Fail(f"Invalid: {text}".strip(), model=model)
    if v.kind in ("Unknown", "Timeout"):
        return Fail(f"Unknown: {v.kind.lower()} {v.detail}".strip())
    return Fail(f"SolverError: {v.detail}")


def outcome_from_json(d: Mapping) -> ProverOutcome:
    """Decode a scripted-fixture or wire reply into an outcome."""
    if not isinstance(d, Mapping):
        raise MalformedResponse("reply must be a JSON object")
    kind = d.get("kind")
    calls = int(d.get("calls_used", d.get("callsUsed", 1)))
    try:
        if kind in ("success", "lemmas"):
            lemmas = d.get("lemmas", [])
            if not isinstance(lemmas, list):
                raise MalformedResponse("lemmas must be a list")
            return Success(LemmaChain(tuple(parse_formula(x) for x in lemmas), d.get("note", "")), calls)
        if kind in ("fail", "give_up"):
            return Fail(str(d.get("reason", "gave up")), calls)
        if kind == "change":
            return Change(edit_from_json(d["edit"]), str(d.get("justification", "")), calls)
    except (KeyError, TypeError) as exc:
        raise MalformedResponse(f"bad {kind} reply: {exc}") from None
    except WyvError as exc:
        if isinstance(exc, MalformedResponse):
            raise
        raise MalformedResponse(f"bad {kind} reply: {exc}") from None
    raise MalformedResponse(f"unknown reply kind {kind!r}")


class ScriptedAgent:
    """Replays a fixture keyed by (obligation name, attempt index); unlisted keys Fail.

    Attempt indices start at 1 and count every attempt on that obligation
    name over the whole run, across outer iterations.
    """

    def __init__(self, plan: Mapping[tuple[str, int], ProverOutcome], name: str = "scripted",
                 proposals: Sequence[str] = ()):
        self.plan = dict(plan)
        self.name = name
        self.proposals = list(proposals)

    def attempt(self, ob: Obligation, ctx: MethodContext, attempt: int) -> ProverOutcome:
        return self.plan.get((ob.name, attempt), Fail("unscripted"))

    # used by the sequential orchestrator
    def propose(self, current: MethodDecl, history: list, turn: int):
        if not self.proposals:
            return pretty_print(current), {}
        return self.proposals[min(turn, len(self.proposals)) - 1], {}


def scripted_agent(fixture: Union[Mapping, str, os.PathLike]) -> ScriptedAgent:
    """Build a scripted agent from a fixture dict or a JSON file path.

    Fixture shape::

        {"name": "...",
         "outcomes": [{"goal": "h.loop", "attempt": 3, "kind": "change", "edit": {...}}, ...],
         "proposals": ["method ... (full source per turn)"]}
    """
    if not isinstance(fixture, Mapping):
        with open(fixture) as fh:
            fixture = json.load(fh)
    plan = {}
    for row in fixture.get("outcomes", []):
        plan[(row["goal"], int(row["attempt"]))] = outcome_from_json(row)
    return ScriptedAgent(plan, fixture.get("name", "scripted"), fixture.get("proposals", []))


class HttpAgent:
    """Posts the obligation to a JSON endpoint; see docs/agent_protocol.md."""

    def __init__(self, url: str, name: str = "http", timeout_s: float = 60.0,
                 key_env: str = "WYVC_AGENT_KEY"):
        self.url = url
        self.name = name
        self.timeout_s = timeout_s
        self.key_env = key_env

    def request_body(self, ob: Obligation, ctx: MethodContext, attempt: int) -> dict:
        return {
            "protocol": 1,
            "obligation": {"name": ob.name, "formula": expr_str(ob.formula), "tier": ob.tier.value},
            "method": pretty_print(ctx.method) if ctx.method is not None else None,
            "siblings": list(ctx.siblings),
            "attempt": attempt,
            "history": list(ctx.history),
        }

    def attempt(self, ob: Obligation, ctx: MethodContext, attempt: int) -> ProverOutcome:
        data = json.dumps(self.request_body(ob, ctx, attempt)).encode()
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(self.url, data=data, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                reply = json.loads(resp.read().decode())
        except TimeoutError:
            return Fail("network: timeout")
        except (urllib.error.URLError, OSError) as exc:
            return Fail(f"network: {exc}")
        except json.JSONDecodeError:
            return Fail("malformed: reply is not JSON")
        try:
            return outcome_from_json(reply)
        except MalformedResponse as exc:
            return Fail(f"malformed: {exc}")


def http_agent(endpoint: Union[str, Mapping]) -> HttpAgent:
    if isinstance(endpoint, str):
        return HttpAgent(endpoint)
    return HttpAgent(endpoint["url"], endpoint.get("name", "http"), float(endpoint.get("timeout_s", 60)))


# -------------------------------------------------------------- prove_goal


@dataclass(frozen=True)
class Attempt:
    """An agent outcome after local validation, with its full cost."""

    outcome: ProverOutcome
    agent_calls: int
    solver_calls: int
    raw_kind: str


def prove_goal(agent, ob: Obligation, ctx: MethodContext, budget: TurnBudget = TurnBudget(),
               attempt: int = 1) -> Attempt:
    """Run one agent attempt and validate whatever it claims.

    Built-in SMT successes are already solver checks and are not re-run;
    every other Success goes through ``validate_chain``.
    """
    if budget.turns < 1:
        raise ValueError("budget.turns must be >= 1")
    try:
        out = agent.attempt(ob, ctx, attempt)
    except AgentTimeout:
        return Attempt(Fail("agent timeout", budget.turns), budget.turns, 0, "Fail")
    except MalformedResponse as exc:
        return Attempt(Fail(f"malformed: {exc}"), 1, 0, "Fail")
    raw = out.kind
    calls = max(1, out.calls_used)
    if calls > budget.turns:
        return Attempt(Fail(f"agent used {calls} turns, budget {budget.turns}", budget.turns),
                       budget.turns, 0, raw)
    if isinstance(agent, SmtAgent):
        return Attempt(out, 0, 1, raw)
    if isinstance(out, Success):
        check = validate_chain(ob, out.chain, ctx)
        if not check.ok:
            return Attempt(Fail(f"rejected lemma chain: {check.detail}", calls), calls, check.solver_calls, raw)
        return Attempt(out, calls, check.solver_calls, raw)
    return Attempt(out, calls, 0, raw)
