"""Proof orchestration: the sequential loop and goal decomposition with edits.

``run_decomposition`` generates named obligations, lets the solver try the
routine ones, farms the rest out to agents under a schedule, and applies
any requested edits before regenerating. Proofs survive an edit when the
regenerated obligation has the same name and the same formula text.
"""

from __future__ import annotations

import json
import os
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

from .agents import (
    AddInvariant, Attempt, Change, ChainCheck, EditRequest, Fail, LemmaChain, MethodContext,
    RemoveInvariant, ReplaceDecreasing, ReplaceInvariant, RewriteBody, SmtAgent, Success,
    TurnBudget, edit_to_json, outcome_to_json, prove_goal, validate_chain,
)
from .errors import EditRejected, WyvError
from .schedule import IterativeDeepening, schedule_to_json, settle_stage
from .smt import SolverConfig
from .speclib import DEFAULT_LIBRARY, SpecLibraryConfig
from .syntax.ast import If, MethodDecl, Program, Seq, Stmt, While
from .syntax.hashing import hash_formula, hash_method
from .syntax.parser import parse_method
from .syntax.printer import pretty_print
from .vcgen import Obligation, Tier, generate_obligations

# ------------------------------------------------------------------ edits


def _map_loops(s: Stmt, fn, counter: list[int]) -> Stmt:
    if isinstance(s, Seq):
        return Seq(tuple(_map_loops(c, fn, counter) for c in s.stmts), s.span)
    if isinstance(s, If):
        then = _map_loops(s.then, fn, counter)
        return If(s.cond, then, _map_loops(s.orelse, fn, counter), s.span)
    if isinstance(s, While):
        counter[0] += 1
        k = counter[0]
        w = While(s.cond, s.invariants, s.decreasing, _map_loops(s.body, fn, counter), s.span)
        return fn(k, w)
    return s


def _edit_loops(m: MethodDecl, fn) -> MethodDecl:
    return replace(m, body=_map_loops(m.body, fn, [0]))


def _edit_target(e: EditRequest) -> tuple:
    if isinstance(e, (AddInvariant, ReplaceInvariant, RemoveInvariant)):
        return ("invariant", e.name)
    if isinstance(e, ReplaceDecreasing):
        return ("decreasing", e.loop)
    return ("body", e.loop)


def _apply_one(m: MethodDecl, e: EditRequest) -> MethodDecl:
    hit = [False]

    def at_loop(k: int, w: While) -> While:
        if isinstance(e, AddInvariant) and k == e.loop:
            hit[0] = True
            return replace(w, invariants=w.invariants + ((e.name, e.formula),))
        if isinstance(e, ReplaceDecreasing) and k == e.loop:
            hit[0] = True
            return replace(w, decreasing=e.expr)
        if isinstance(e, RewriteBody) and k == e.loop:
            hit[0] = True
            return replace(w, body=e.body)
        if isinstance(e, (ReplaceInvariant, RemoveInvariant)):
            names = [n for n, _ in w.invariants]
            if e.name in names:
                hit[0] = True
                if isinstance(e, RemoveInvariant):
                    return replace(w, invariants=tuple(p for p in w.invariants if p[0] != e.name))
                return replace(w, invariants=tuple((n, e.formula if n == e.name else f)
                                                   for n, f in w.invariants))
        return w

    out = _edit_loops(m, at_loop)
    if not hit[0]:
        if isinstance(e, (ReplaceInvariant, RemoveInvariant)):
            raise ValueError(f"no invariant named {e.name!r}")
        raise ValueError(f"no loop number {e.loop}")
    return out


@dataclass(frozen=True)
class ChangeResult:
    method: MethodDecl
    applied: tuple
    rejected: tuple


def apply_change(m: MethodDecl, edits: Sequence[EditRequest],
                 program: Optional[Program] = None) -> ChangeResult:
    """Apply edits in priority order; later edits on an already-edited target lose.

    Each surviving edit must leave a method that prints, re-parses and type
    checks. Raises EditRejected when no edit survives.
    """
    if not edits:
        raise ValueError("apply_change needs at least one edit")
    applied, rejected = [], []
    claimed: dict[tuple, EditRequest] = {}
    cur = m
    for e in edits:
        key = _edit_target(e)
        if key in claimed:
            rejected.append((e, f"conflicts with an earlier edit of {key[0]} {key[1]}"))
            continue
        try:
            candidate = _apply_one(cur, e)
            candidate = parse_method(pretty_print(candidate), program=program)
        except (WyvError, ValueError) as exc:
            rejected.append((e, str(exc)))
            continue
        claimed[key] = e
        applied.append(e)
        cur = candidate
    if not applied:
        raise EditRejected(rejected)
    return ChangeResult(cur, tuple(applied), tuple(rejected))


# ------------------------------------------------------------- proof store


@dataclass(frozen=True)
class ProofEntry:
    formula_digest: str
    chain: LemmaChain
    provenance: str


class ProofStore:
    """Proofs keyed by (method digest, obligation name)."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.entries: dict[tuple[str, str], ProofEntry] = {}

    @classmethod
    def for_project(cls, project_dir: str) -> "ProofStore":
        store = cls(os.path.join(project_dir, ".wyvc", "proofs.json"))
        if os.path.exists(store.path):
            store.load()
        return store

    def record(self, method_digest: str, ob: Obligation, chain: LemmaChain, provenance: str) -> None:
        self.entries[(method_digest, ob.name)] = ProofEntry(hash_formula(ob.formula), chain, provenance)

    def lookup(self, method_digest: str, ob: Obligation) -> Optional[ProofEntry]:
        e = self.entries.get((method_digest, ob.name))
        if e is not None and e.formula_digest == hash_formula(ob.formula):
            return e
        return None

    def to_json(self) -> dict:
        return {"version": 1, "entries": [
            {"method": d, "name": n, "formula": e.formula_digest, "chain": e.chain.to_json(),
             "provenance": e.provenance}
            for (d, n), e in sorted(self.entries.items())]}

    def save(self) -> None:
        if not self.path:
            return
        os.makedirs(os.path.dirname(self.path), exist_ok=True)
        with open(self.path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)

    def load(self) -> None:
        with open(self.path) as fh:
            data = json.load(fh)
        for row in data.get("entries", []):
            self.entries[(row["method"], row["name"])] = ProofEntry(
                row["formula"], LemmaChain.from_json(row["chain"]), row.get("provenance", ""))


def transfer_proofs(store: ProofStore, old: MethodDecl, new: MethodDecl,
                    program: Optional[Program] = None) -> tuple[set[str], set[str]]:
    """Carry proofs from ``old`` to ``new`` by obligation name and formula digest.

    Returns (reused, invalidated) name sets over the obligations of ``new``.
    Reused entries are copied, not trusted: the orchestrator re-validates
    them before they count.
    """
    old_d, new_d = hash_method(old), hash_method(new)
    reused, invalidated = set(), set()
    for ob in generate_obligations(new, program):
        e = store.lookup(old_d, ob)
        if e is None:
            invalidated.add(ob.name)
            continue
        reused.add(ob.name)
        if old_d != new_d:
            store.entries[(new_d, ob.name)] = ProofEntry(e.formula_digest, e.chain, "transfer")
    return reused, invalidated


# ------------------------------------------------------------------- trace


@dataclass(frozen=True)
class TraceEvent:
    iteration: int
    goal: Optional[str]  # None: shared step on every goal's path (sequential proposals)
    agent: str
    stage: int
    calls_used: int
    outcome: str
    kind: str = "agent"  # agent | solver
    attempt: int = 0
    detail: str = ""

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v not in ("", None) or k == "goal"}


@dataclass
class ScheduleTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def add(self, ev: TraceEvent) -> None:
        self.events.append(ev)

    @property
    def compute(self) -> int:
        return sum(e.calls_used for e in self.events)

    @property
    def agent_calls(self) -> int:
        return sum(e.calls_used for e in self.events if e.kind == "agent")

    @property
    def solver_calls(self) -> int:
        return sum(e.calls_used for e in self.events if e.kind == "solver")

    @property
    def iterations(self) -> int:
        return max((e.iteration for e in self.events), default=0)

    def iteration_latency(self, it: int) -> int:
        """Longest per-goal path: sum over stages of the costliest attempt in that stage."""
        per_attempt: dict[tuple, int] = defaultdict(int)
        shared: dict[tuple, int] = defaultdict(int)
        for e in self.events:
            if e.iteration != it:
                continue
            if e.goal is None:
                shared[(e.stage, e.attempt)] += e.calls_used
            else:
                per_attempt[(e.goal, e.stage, e.attempt)] += e.calls_used
        stage_cost: dict[tuple, int] = defaultdict(int)
        for (goal, stage, _), c in per_attempt.items():
            stage_cost[(goal, stage)] = max(stage_cost[(goal, stage)], c)
        by_goal: dict[str, int] = defaultdict(int)
        for (goal, _), c in stage_cost.items():
            by_goal[goal] += c
        prefix = sum(shared.values())
        return prefix + max(by_goal.values(), default=0)

    @property
    def latency(self) -> int:
        return sum(self.iteration_latency(it) for it in range(1, self.iterations + 1))

    def to_json(self) -> dict:
        return {"compute": self.compute, "latency": self.latency, "agentCalls": self.agent_calls,
                "solverCalls": self.solver_calls, "events": [e.to_json() for e in self.events]}


# ------------------------------------------------------------------ results


@dataclass
class OrchestratorResult:
    status: str  # Verified | Failed | BudgetExhausted
    method: MethodDecl
    chains: dict[str, tuple[LemmaChain, str]]
    trace: ScheduleTrace
    reason: str = ""
    history: list = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return self.status == "Verified"

    @property
    def iterations(self) -> int:
        return self.trace.iterations

    def summary(self) -> str:
        return (f"compute={self.trace.compute}, latency={self.trace.latency}, "
                f"verified={str(self.verified).lower()}")

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "iterations": self.iterations,
            "method": pretty_print(self.method),
            "proofs": {n: {"chain": c.to_json(), "provenance": p} for n, (c, p) in sorted(self.chains.items())},
            "history": self.history,
            "trace": self.trace.to_json(),
            "summary": self.summary(),
        }


def _agent_list(agents) -> list:
    if isinstance(agents, (list, tuple)):
        return list(agents)
    return [agents]


# ------------------------------------------------------------ decomposition


def run_decomposition(agents, m0: MethodDecl, budget: int = 64, schedule=None, *,
                      program: Optional[Program] = None, store: Optional[ProofStore] = None,
                      library: SpecLibraryConfig = DEFAULT_LIBRARY,
                      solver: Optional[SolverConfig] = None, timeout_ms: Optional[int] = None,
                      max_stages: int = 4, max_iterations: int = 20, turns_per_attempt: int = 1,
                      workers: int = 8) -> OrchestratorResult:
    """Prove ``m0`` by goal decomposition.

    Agents take turns on a goal's attempts (attempt n goes to agent
    ``(n - 1) % len(agents)``). ``budget`` caps total agent calls. Stages
    are global: every pending goal runs its stage, then the coordinator
    looks at the results. Any Change ends the iteration after the current
    stage; edits are applied in (obligation name, agent index) order.
    """
    if budget < 1:
        raise ValueError("agent budget must be >= 1")
    roster = _agent_list(agents)
    schedule = schedule or IterativeDeepening()
    store = store if store is not None else ProofStore()
    trace = ScheduleTrace()
    attempts: Counter = Counter()
    agent_calls = 0
    m = m0
    history: list = []
    chains: dict[str, tuple[LemmaChain, str]] = {}
    smt = SmtAgent()
    pool = ThreadPoolExecutor(max_workers=max(1, workers))
    try:
        for iteration in range(1, max_iterations + 1):
            obs = generate_obligations(m, program)
            digest = hash_method(m)
            ctx = MethodContext(m, program, tuple(ob.name for ob in obs), history, library, solver, timeout_ms)
            chains = {}

            # stage 0: stored proofs and first-tier solver attempts
            def first_pass(ob: Obligation):
                entry = store.lookup(digest, ob)
                if entry is not None:
                    return "store", entry, validate_chain(ob, entry.chain, ctx)
                if ob.tier == Tier.SMT_FIRST:
                    return "smt", None, prove_goal(smt, ob, ctx)
                return None, None, None

            for ob, (how, entry, res) in zip(obs, pool.map(first_pass, obs)):
                if how == "store":
                    ok = res.ok
                    trace.add(TraceEvent(iteration, ob.name, "store", 0, res.solver_calls,
                                         "Success" if ok else "Fail", "solver", 0, entry.provenance))
                    if ok:
                        chains[ob.name] = (entry.chain, entry.provenance)
                        continue
                    if ob.tier == Tier.SMT_FIRST:
                        res = prove_goal(smt, ob, ctx)
                        how = "smt"
                if how == "smt":
                    trace.add(TraceEvent(iteration, ob.name, "smt", 0, res.solver_calls,
                                         res.outcome.kind, "solver", 0, _short(res.outcome)))
                    if isinstance(res.outcome, Success):
                        chains[ob.name] = (res.outcome.chain, "smt")
                        store.record(digest, ob, res.outcome.chain, "smt")

            active = [ob for ob in obs if ob.name not in chains]
            changes: list[tuple[str, int, EditRequest, str]] = []
            exhausted = False
            sizes = schedule.sizes()
            stage = 0
            while active and stage < max_stages and not changes:
                size = next(sizes)
                stage += 1
                tasks = []
                for ob in active:
                    for j in range(size):
                        n = attempts[ob.name] + j + 1
                        tasks.append((ob, j, n, (n - 1) % len(roster)))
                room = budget - agent_calls
                if room <= 0:
                    exhausted = True
                    break
                if len(tasks) * turns_per_attempt > room:
                    tasks = tasks[: max(0, room // turns_per_attempt)]
                    exhausted = True
                    if not tasks:
                        break

                def run(task):
                    ob, _j, n, a = task
                    return prove_goal(roster[a], ob, ctx, TurnBudget(turns_per_attempt), attempt=n)

                results = list(pool.map(run, tasks))
                by_goal: dict[str, list] = defaultdict(list)
                for task, res in zip(tasks, results):
                    by_goal[task[0].name].append((task, res))
                still = []
                for ob in active:
                    rows = by_goal.get(ob.name, [])
                    decisive = [isinstance(r.outcome, (Success, Change)) for _, r in rows]
                    paid = settle_stage(decisive, schedule.cancel_in_stage)
                    attempts[ob.name] += paid
                    resolved = False
                    for (task, res) in rows[:paid]:
                        _, _, n, a = task
                        agent_calls += res.agent_calls
                        trace.add(TraceEvent(iteration, ob.name, roster[a].name, stage, res.agent_calls,
                                             res.outcome.kind, "agent", n, _short(res.outcome)))
                        if res.solver_calls:
                            trace.add(TraceEvent(iteration, ob.name, "validate", stage, res.solver_calls,
                                                 "Success" if isinstance(res.outcome, Success) else "Fail",
                                                 "solver", n))
                        if resolved:
                            continue
                        if isinstance(res.outcome, Success):
                            chains[ob.name] = (res.outcome.chain, roster[a].name)
                            store.record(digest, ob, res.outcome.chain, roster[a].name)
                            resolved = True
                        elif isinstance(res.outcome, Change):
                            changes.append((ob.name, a, res.outcome.edit, res.outcome.justification))
                            resolved = True
                    if not resolved:
                        still.append(ob)
                active = still
                if exhausted:
                    break

            if all(ob.name in chains for ob in obs):
                store.save()
                return OrchestratorResult("Verified", m, chains, trace, history=history)
            if changes:
                changes.sort(key=lambda c: (c[0], c[1]))
                try:
                    res = apply_change(m, [c[2] for c in changes], program)
                except EditRejected as exc:
                    history.append({"iteration": iteration, "rejected": [
                        {"edit": edit_to_json(e), "reason": r} for e, r in exc.reasons]})
                    if exhausted:
                        break
                    continue
                history.append({"iteration": iteration,
                                "applied": [edit_to_json(e) for e in res.applied],
                                "rejected": [{"edit": edit_to_json(e), "reason": r} for e, r in res.rejected]})
                reused, invalidated = transfer_proofs(store, m, res.method, program)
                history[-1]["reused"] = sorted(reused)
                history[-1]["invalidated"] = sorted(invalidated)
                m = res.method
                if exhausted:
                    break
                continue
            if exhausted:
                break
            store.save()
            missing = sorted(ob.name for ob in obs if ob.name not in chains)
            return OrchestratorResult("Failed", m, chains, trace, f"unproved: {', '.join(missing)}", history)
        store.save()
        return OrchestratorResult("BudgetExhausted", m, chains, trace,
                                  f"agent budget {budget} spent after {agent_calls} calls", history)
    finally:
        pool.shutdown(wait=True)


def _short(o) -> str:
    if isinstance(o, Fail):
        return o.reason.splitlines()[0][:120] if o.reason else ""
    if isinstance(o, Change):
        return json.dumps(edit_to_json(o.edit), sort_keys=True)
    return ""


# --------------------------------------------------------------- sequential


def run_sequential(agent, m0: MethodDecl, max_turns: int = 3, *, program: Optional[Program] = None,
                   library: SpecLibraryConfig = DEFAULT_LIBRARY, solver: Optional[SolverConfig] = None,
                   timeout_ms: Optional[int] = None, workers: int = 8) -> OrchestratorResult:
    """Whole-method loop: propose, regenerate obligations, validate, report back.

    ``agent.propose(current, history, turn)`` returns ``(method or source,
    {obligation name: LemmaChain})``. Every obligation is checked on every
    turn, so the history carries the full list of failures.
    """
    if max_turns < 1:
        raise ValueError("max_turns must be >= 1")
    trace = ScheduleTrace()
    history: list = []
    m = m0
    chains: dict[str, tuple[LemmaChain, str]] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for turn in range(1, max_turns + 1):
            proposal, lemma_sets = agent.propose(m, history, turn)
            trace.add(TraceEvent(turn, None, agent.name, 0, 1, "Proposal", "agent", turn))
            if isinstance(proposal, str):
                try:
                    candidate = parse_method(proposal, program=program)
                except WyvError as exc:
                    history.append({"turn": turn, "error": str(exc), "failing": [], "models": {}})
                    continue
            else:
                candidate = proposal
            m = candidate
            obs = generate_obligations(m, program)
            ctx = MethodContext(m, program, tuple(ob.name for ob in obs), history, library, solver, timeout_ms)

            def check(ob: Obligation) -> ChainCheck:
                return validate_chain(ob, lemma_sets.get(ob.name, LemmaChain()), ctx)

            chains = {}
            failing, models = [], {}
            for ob, res in zip(obs, pool.map(check, obs)):
                trace.add(TraceEvent(turn, ob.name, "validate", 1, res.solver_calls,
                                     "Success" if res.ok else "Fail", "solver", 0, res.detail))
                if res.ok:
                    chains[ob.name] = (lemma_sets.get(ob.name, LemmaChain()), agent.name)
                else:
                    failing.append(ob.name)
                    last = res.verdicts[-1] if res.verdicts else None
                    if last is not None and last.model is not None:
                        models[ob.name] = last.model.to_json()
            if not failing:
                return OrchestratorResult("Verified", m, chains, trace, history=history)
            history.append({"turn": turn, "failing": failing, "models": models})
    return OrchestratorResult("BudgetExhausted", m, chains, trace,
                              f"no verified proposal in {max_turns} turns", history)
