"""End-to-end acceptance checks. Each test prints one PASS/FAIL line."""

from __future__ import annotations

import json
import math
import time

from wyvc.agents import AddInvariant, LemmaChain, scripted_agent
from wyvc.analysis import bounded_disprove, check_imperativeness, make_disproof_goal, replay_disproof
from wyvc.config import RunConfig
from wyvc.corpus import run_corpus
from wyvc.orchestrator import ProofStore, apply_change, run_decomposition, transfer_proofs
from wyvc.schedule import IterativeDeepening, Parallel, expected_latency, simulate
from wyvc.smt import check_obligation
from wyvc.syntax import hash_formula, hash_method, parse_formula, parse_method
from wyvc.syntax.ast import Apply, CallStmt, While, subexprs, walk
from wyvc.vcgen import generate_obligations, obligation_names

from conftest import CORPUS, corpus_files, load, needs_solver

# pinned thresholds
OBLIGATION_TIMEOUT_MS = 10_000
SUITE_SECONDS = 60.0
SCHEDULER_SECONDS = 30.0
SIM_GOALS = 10_000
STD_ERRORS = 3.0
FUZZ_TRIALS = 1000
MIN_VALID, MIN_MUTANTS, MIN_LEAKY = 10, 10, 6

FIG1_NAMES = ["h.entry", "h.loop", "h.exit", "dec.1.nonneg", "dec.1.strict", "ensures.1"]
FIG1_COMPUTE, FIG1_ITERATIONS = 29, 2
TRANSFER_REUSED, TRANSFER_INVALIDATED = 2, 6


def verdict(name: str, ok: bool, detail: str = "") -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
    assert ok, detail


@needs_solver
def test_fig1_obligations_all_valid(sum_method):
    start = time.monotonic()
    obs = generate_obligations(sum_method)
    names = obligation_names(obs)
    kinds = {ob.name: check_obligation(ob, timeout_ms=OBLIGATION_TIMEOUT_MS).kind for ob in obs}
    took = time.monotonic() - start
    ok = names == FIG1_NAMES and set(kinds.values()) == {"Valid"} and took < SUITE_SECONDS
    verdict("fig1 obligations", ok, f"names={names} verdicts={kinds} {took:.1f}s")


@needs_solver
def test_fig1_orchestration(weak_sum):
    res = run_decomposition([scripted_agent(CORPUS / "fixtures/fig1.json")], weak_sum.main, 64,
                            Parallel(3), timeout_ms=OBLIGATION_TIMEOUT_MS)
    outcomes = [(e.goal, e.outcome) for e in res.trace.events if e.kind == "agent" and e.goal == "h.loop"
                and e.iteration == 1]
    counted = sum(e.calls_used for e in res.trace.events)
    ok = (res.verified and res.iterations == FIG1_ITERATIONS and res.trace.compute == counted == FIG1_COMPUTE
          and [o for _, o in outcomes] == ["Fail", "Fail", "Change"])
    verdict("fig1 orchestration", ok,
            f"{res.status} iterations={res.iterations} compute={res.trace.compute} events={counted}")


def _features(prog) -> set[str]:
    out = set()
    for m in prog.methods:
        loops = [s for s in walk(m.body) if isinstance(s, While)]
        out.add("loop-free" if not loops else "loop")
        if any(isinstance(t, While) for w in loops for t in walk(w.body)):
            out.add("nested")
        if any(isinstance(s, CallStmt) for s in walk(m.body)):
            out.add("calls")
    return out


@needs_solver
def test_soundness_bridge():
    cfg = RunConfig(fuzz_trials=FUZZ_TRIALS, solver_timeout_ms=OBLIGATION_TIMEOUT_MS)
    rep = run_corpus(str(CORPUS), cfg, categories=("valid", "mutants"))
    valid = [f for f in rep.files if f.category == "valid"]
    mutants = [f for f in rep.files if f.category == "mutant"]
    features = set().union(*(_features(load(f"valid/{p.name}")) for p in corpus_files("valid")))
    bad = [f"{f.path}: {f.detail}" for f in rep.files if not f.ok]
    trials_ok = all(r["trials"] == FUZZ_TRIALS for f in valid for r in f.data["fuzz"].values())
    ok = (rep.ok and trials_ok and len(valid) >= MIN_VALID and len(mutants) >= MIN_MUTANTS
          and {"loop-free", "loop", "nested", "calls"} <= features)
    verdict("soundness bridge", ok, f"valid={len(valid)} mutants={len(mutants)} "
                                    f"features={sorted(features)} failures={bad}")


def test_proof_transfer(weak_sum):
    old = weak_sum.main
    store = ProofStore()
    for ob in generate_obligations(old):
        store.record(hash_method(old), ob, LemmaChain(), "test")
    new = apply_change(old, [AddInvariant(1, "hb", parse_formula("0 <= i && i <= xs.size"))]).method
    reused, invalid = transfer_proofs(store, old, new)
    before = {ob.name: hash_formula(ob.formula) for ob in generate_obligations(old)}
    unchanged = {ob.name for ob in generate_obligations(new) if before.get(ob.name) == hash_formula(ob.formula)}
    ok = reused == unchanged and (len(reused), len(invalid)) == (TRANSFER_REUSED, TRANSFER_INVALIDATED)
    verdict("proof transfer", ok, f"reused={sorted(reused)} invalidated={sorted(invalid)}")


def _oracle_latency(p: float, stages=(1, 1, 2, 4), horizon=20_000) -> float:
    """E[stages until first success] by summing P(first success at attempt n) * stage(n)."""
    sizes, s = list(stages), stages[-1]
    while sum(sizes) < horizon:
        s *= 2
        sizes.append(s)
    total, n = 0.0, 0
    for j, size in enumerate(sizes, 1):
        # P(first success lands in stage j) = q^n - q^(n+size)
        q = 1 - p
        total += j * (q ** n - q ** (n + size))
        n += size
    return total


def test_scheduler_math():
    start = time.monotonic()
    sched = IterativeDeepening((1, 1, 2, 4))
    rows, ok = {}, True
    for k in (4, 16, 64):
        p = 1 / k
        sim = simulate(sched, p, SIM_GOALS, seed=k)
        exact = _oracle_latency(p)
        within = abs(sim.mean_latency - exact) <= STD_ERRORS * sim.se_latency
        cheap = sim.mean_compute <= 4 / p
        agrees = math.isclose(exact, expected_latency(sched, p), rel_tol=1e-9)
        rows[k] = (sim.mean_latency, exact, sim.mean_compute)
        ok &= within and cheap and agrees
    ratio = rows[64][0] / rows[4][0]
    took = time.monotonic() - start
    ok &= ratio <= 2 * math.log(64) / math.log(4) and took < SCHEDULER_SECONDS
    detail = " ".join(f"k={k}: lat={a:.3f} E={b:.3f} compute={c:.1f}" for k, (a, b, c) in rows.items())
    verdict("scheduler math", ok, f"{detail} ratio={ratio:.2f} {took:.1f}s")


@needs_solver
def test_disproving():
    specs = {
        "contradiction": "method c (x: Int) returns (r: Int) ensures r < 0 && r > 0 do return 0",
        "no square root": "method s (x: Int) returns (r: Int) requires x = 2 ensures r * r = x do return 1",
    }
    notes, ok = [], True
    for label, src in specs.items():
        goal = make_disproof_goal(parse_method(src))
        res = bounded_disprove(goal, timeout_ms=OBLIGATION_TIMEOUT_MS)
        good = res.disproved and replay_disproof(goal, res)
        ok &= good
        notes.append(f"{label}={res.status}{res.witness}")
    false_alarms = []
    for path in corpus_files("valid"):
        for m in load(f"valid/{path.name}").methods:
            res = bounded_disprove(make_disproof_goal(m), timeout_ms=OBLIGATION_TIMEOUT_MS)
            if res.status != "Inconclusive":
                false_alarms.append(f"{path.name}:{m.name}")
    ok &= not false_alarms
    verdict("disproving", ok, " ".join(notes) + f" false_disproofs={false_alarms}")


def test_leakage_judge(sum_method):
    listing = check_imperativeness(load("leaky/sum_direct.wyv").main)
    loop_ok = check_imperativeness(sum_method).imperative
    uses_spec_in_invariants = any(isinstance(x, Apply) for s in walk(sum_method.body) if isinstance(s, While)
                                  for _, f in s.invariants for x in subexprs(f))
    labels = json.loads((CORPUS / "leaky/labels.json").read_text())
    agree = 0
    for path in corpus_files("leaky"):
        v = check_imperativeness(load(f"leaky/{path.name}").main)
        lab = labels[path.name]
        agree += v.imperative == lab["imperative"] and sorted(v.rules) == sorted(lab["rules"])
    valid_clean = all(check_imperativeness(m).imperative
                      for p in corpus_files("valid") for m in load(f"valid/{p.name}").methods)
    n = len(corpus_files("leaky"))
    ok = ("R1" in listing.rules and loop_ok and uses_spec_in_invariants and valid_clean
          and n >= MIN_LEAKY and agree == n)
    verdict("leakage judge", ok, f"listing rules={sorted(listing.rules)} agreement={agree}/{n}")


@needs_solver
def test_zero_trust():
    outcomes = {}
    for program in ("valid/sum.wyv", "scenarios/sum_weak.wyv"):
        m = load(program).main
        for sched in (IterativeDeepening((1, 1, 2, 4)), Parallel(3)):
            res = run_decomposition([scripted_agent(CORPUS / "fixtures/bogus_chain.json")], m, 16, sched,
                                    timeout_ms=5_000)
            outcomes[f"{program}/{sched.label()}"] = res.status
    verdict("zero trust", "Verified" not in outcomes.values(), f"outcomes={outcomes}")
