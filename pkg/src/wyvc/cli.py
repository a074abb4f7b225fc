"""``wyvc`` command line. Exit codes: 0 success, 1 verification/judge failure, 2 usage or parse error."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .agents import HttpAgent, SmtAgent, scripted_agent
from .analysis import DisproofDomain, bounded_disprove, check_imperativeness, make_disproof_goal
from .config import RunConfig, load_config
from .corpus import run_corpus, verify_program
from .errors import DomainExhausted, WyvError
from .orchestrator import ProofStore, run_decomposition, run_sequential
from .schedule import expected_compute, expected_latency, parse_schedule, simulate
from .semantics import ContractViolation, Returned, eval_method, fuzz_contracts
from .syntax.ast import Program
from .syntax.parser import parse_program

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _load(path: str) -> Program:
    try:
        with open(path) as fh:
            source = fh.read()
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc}") from None
    try:
        return parse_program(source)
    except WyvError as exc:
        raise _Usage(f"{path}: {exc}") from None


def _method(program: Program, name: Optional[str]):
    if name is None:
        return program.main
    if name not in program:
        raise _Usage(f"no method named {name!r}")
    return program.get(name)


def _report(args, cfg: RunConfig, command: str, result: dict) -> dict:
    doc = {"tool": "wyvc", "version": __version__, "schema": 1, "command": command,
           "config": cfg.to_json(), "result": result}
    if getattr(args, "report", None):
        with open(args.report, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
    if getattr(args, "json", False):
        print(json.dumps(doc, indent=2, sort_keys=True))
    return doc


def _say(args, text: str) -> None:
    if not getattr(args, "json", False):
        print(text)


# ------------------------------------------------------------------ commands


def cmd_check(args, cfg: RunConfig) -> int:
    program = _load(args.file)
    results = verify_program(program, cfg, dump_dir=args.dump_smt)
    valid = sum(r.verdict.valid for r in results)
    for r in results:
        line = f"{r.method}.{r.obligation.name}: {r.verdict.kind}"
        if r.verdict.model is not None and r.verdict.model.values:
            line += f"  model {json.dumps(r.verdict.model.to_json(), sort_keys=True)}"
        elif r.verdict.detail:
            line += f"  ({r.verdict.detail})"
        _say(args, line)
    _say(args, f"{valid}/{len(results)} Valid")
    _report(args, cfg, "check", {"obligations": [r.to_json() for r in results],
                                 "valid": valid, "total": len(results)})
    return EXIT_OK if valid == len(results) else EXIT_FAIL


def _roster(cfg: RunConfig, fixture: Optional[str]):
    if fixture:
        return [scripted_agent(fixture)]
    out = []
    for spec in cfg.agents:
        kind, _, arg = spec.partition(":")
        if kind == "smt":
            out.append(SmtAgent())
        elif kind == "scripted":
            out.append(scripted_agent(arg))
        elif kind == "http":
            ep = cfg.endpoints.get(arg)
            if ep is None:
                raise _Usage(f"no endpoint named {arg!r} in config")
            out.append(HttpAgent(ep["url"], arg, float(ep.get("timeout_s", 60))))
        else:
            raise _Usage(f"unknown agent {spec!r}")
    if not out:
        raise _Usage("empty agent roster")
    return out


def cmd_prove(args, cfg: RunConfig) -> int:
    program = _load(args.file)
    m = _method(program, args.method)
    roster = _roster(cfg, args.fixture)
    if cfg.mode == "sequential":
        agent = roster[0]
        if not hasattr(agent, "propose"):
            raise _Usage("sequential mode needs an agent that proposes whole methods (scripted fixture)")
        result = run_sequential(agent, m, cfg.turns, program=program, library=cfg.library(),
                                solver=cfg.solver(), timeout_ms=cfg.solver_timeout_ms)
    else:
        store = ProofStore.for_project(args.project) if args.project else None
        result = run_decomposition(roster, m, cfg.budget, cfg.schedule_obj(), program=program,
                                   store=store, library=cfg.library(), solver=cfg.solver(),
                                   timeout_ms=cfg.solver_timeout_ms, max_stages=cfg.max_stages)
    _say(args, f"{result.status} after {result.iterations} iteration(s)"
               + (f": {result.reason}" if result.reason else ""))
    _say(args, result.summary())
    _report(args, cfg, "prove", result.to_json())
    return EXIT_OK if result.verified else EXIT_FAIL


def cmd_run(args, cfg: RunConfig) -> int:
    program = _load(args.file)
    m = _method(program, args.method)
    try:
        values = json.loads(args.args) if args.args else []
    except json.JSONDecodeError as exc:
        raise _Usage(f"--args is not JSON: {exc}") from None
    if not isinstance(values, list):
        values = [values]
    if len(m.params) == 1 and m.params[0].type.value == "Array Int" and values and not isinstance(values[0], list):
        values = [values]
    if len(values) != len(m.params):
        raise _Usage(f"{m.name} takes {len(m.params)} argument(s)")
    values = [tuple(v) if isinstance(v, list) else v for v in values]
    report = eval_method(m, values, program=program)
    out = report.outcome
    if isinstance(out, Returned):
        v = list(out.value) if isinstance(out.value, tuple) else out.value
        _say(args, json.dumps(v))
        _report(args, cfg, "run", {"returned": v, "steps": report.steps})
        return EXIT_OK
    if isinstance(out, ContractViolation):
        _say(args, f"contract violation: {out.kind} at {out.location}")
        _report(args, cfg, "run", {"violation": out.kind, "location": out.location})
    else:
        _say(args, "fuel exhausted")
        _report(args, cfg, "run", {"fuel_exhausted": True})
    return EXIT_FAIL


def cmd_fuzz(args, cfg: RunConfig) -> int:
    program = _load(args.file)
    m = _method(program, args.method)
    trials = args.trials if args.trials is not None else cfg.fuzz_trials
    try:
        rep = fuzz_contracts(m, trials, seed=cfg.seed, program=program)
    except DomainExhausted as exc:
        _say(args, f"fuzz: {exc}")
        return EXIT_FAIL
    _say(args, f"{rep.violations} violation(s) in {rep.trials} trials (seed {rep.seed})")
    if rep.first_counterexample:
        _say(args, f"first: {json.dumps(rep.first_counterexample, sort_keys=True)}")
    _report(args, cfg, "fuzz", rep.to_json())
    return EXIT_OK if rep.violations == 0 else EXIT_FAIL


def cmd_disprove(args, cfg: RunConfig) -> int:
    program = _load(args.file)
    m = _method(program, args.method)
    try:
        goal = make_disproof_goal(m)
    except ValueError as exc:
        raise _Usage(str(exc)) from None
    res = bounded_disprove(goal, DisproofDomain(max_candidates=args.candidates),
                           cfg.solver_timeout_ms, library=cfg.library(), solver=cfg.solver())
    if res.disproved:
        _say(args, f"Disproved: no output exists for {json.dumps(res.to_json()['witness'], sort_keys=True)}")
    else:
        _say(args, f"Inconclusive after {res.candidates} candidate input(s)")
    _report(args, cfg, "disprove", {"goal": goal.to_json(), **res.to_json()})
    return EXIT_FAIL if res.disproved else EXIT_OK


def cmd_judge(args, cfg: RunConfig) -> int:
    program = _load(args.file)
    m = _method(program, args.method)
    verdict = check_imperativeness(m)
    if verdict.imperative:
        _say(args, "imperative: no violations")
    for v in verdict.violations:
        _say(args, f"{v.location}: {v.rule} {v.excerpt}")
    _report(args, cfg, "judge", verdict.to_json())
    return EXIT_OK if verdict.imperative else EXIT_FAIL


def cmd_sim(args, cfg: RunConfig) -> int:
    try:
        schedules = [parse_schedule(s) for s in args.schedules.split(",")]
    except ValueError as exc:
        raise _Usage(str(exc)) from None
    rows = []
    _say(args, f"p={args.p} goals={args.goals} seed={cfg.seed}")
    _say(args, f"{'schedule':<10} {'compute':>9} {'E[compute]':>11} {'latency':>8} {'E[latency]':>11}")
    for s in schedules:
        r = simulate(s, args.p, args.goals, cfg.seed)
        ec, el = expected_compute(s, args.p), expected_latency(s, args.p)
        rows.append({**r.to_json(), "expected_compute": round(ec, 4), "expected_latency": round(el, 4)})
        _say(args, f"{s.label():<10} {r.mean_compute:>9.2f} {ec:>11.2f} {r.mean_latency:>8.2f} {el:>11.2f}")
    _report(args, cfg, "sim", {"p": args.p, "goals": args.goals, "rows": rows})
    return EXIT_OK


def cmd_corpus(args, cfg: RunConfig) -> int:
    rep = run_corpus(args.root, cfg)
    for f in rep.files:
        _say(args, f"{'ok  ' if f.ok else 'FAIL'} {f.category:<7} {f.path}" + (f"  {f.detail}" if f.detail else ""))
    for cat, c in rep.counts().items():
        _say(args, f"{cat}: {c['ok']}/{c['total']}")
    _report(args, cfg, "corpus", rep.to_json())
    return EXIT_OK if rep.ok else EXIT_FAIL


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wyvc", description="Verifier for the wyv mini-language.")
    p.add_argument("--version", action="version", version=f"wyvc {__version__}")
    p.add_argument("--config", help="path to wyvc.toml (default: ./wyvc.toml if present)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, file=True, method=True):
        if file:
            sp.add_argument("file")
        if method:
            sp.add_argument("--method", help="method to use (default: last in file)")
        sp.add_argument("--json", action="store_true", help="print the JSON report instead of text")
        sp.add_argument("--report", help="also write the JSON report to this path")
        sp.add_argument("--timeout-ms", type=int, help="per-query solver timeout")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--disable-lemma", action="append", default=[], metavar="NAME")

    sp = sub.add_parser("check", help="discharge every obligation with the solver")
    common(sp, method=False)
    sp.add_argument("--dump-smt", metavar="DIR", help="write each SMT-LIB script to DIR")

    sp = sub.add_parser("prove", help="run the agent orchestrator")
    common(sp)
    sp.add_argument("--fixture", help="scripted agent fixture (JSON)")
    sp.add_argument("--mode", choices=["decomposition", "sequential"])
    sp.add_argument("--schedule", help="seq | parK | id | id:1+1+2+4")
    sp.add_argument("--budget", type=int, help="agent-call budget N")
    sp.add_argument("--turns", type=int, help="sequential turn budget T")
    sp.add_argument("--project", help="directory holding .wyvc/proofs.json")

    sp = sub.add_parser("run", help="interpret a method with contract checks")
    common(sp)
    sp.add_argument("--args", default="[]", help='JSON list of arguments, e.g. "[[1,2,3]]"')

    sp = sub.add_parser("fuzz", help="random testing against the contracts")
    common(sp)
    sp.add_argument("--trials", type=int)

    sp = sub.add_parser("disprove", help="search for an input with no valid output")
    common(sp)
    sp.add_argument("--candidates", type=int, default=12)

    sp = sub.add_parser("judge", help="flag functional leakage in executable code")
    common(sp)

    sp = sub.add_parser("sim", help="Monte-Carlo cost of prover schedules")
    common(sp, file=False, method=False)
    sp.add_argument("--p", type=float, default=1 / 16, help="per-attempt success probability")
    sp.add_argument("--schedules", default="seq,par16,id")
    sp.add_argument("--goals", type=int, default=10_000)

    sp = sub.add_parser("corpus", help="run the valid/mutants/leaky corpus")
    common(sp, file=False, method=False)
    sp.add_argument("root", nargs="?", default="corpus")
    return p


def _configure(args) -> RunConfig:
    cfg = load_config(args.config, search_dir=None if args.config else os.getcwd())
    if getattr(args, "timeout_ms", None):
        cfg.solver_timeout_ms = args.timeout_ms
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "disable_lemma", None):
        cfg.disabled_lemmas = sorted(set(cfg.disabled_lemmas) | set(args.disable_lemma))
    for attr in ("mode", "schedule", "budget", "turns"):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, attr, v)
    return cfg


COMMANDS = {"check": cmd_check, "prove": cmd_prove, "run": cmd_run, "fuzz": cmd_fuzz,
            "disprove": cmd_disprove, "judge": cmd_judge, "sim": cmd_sim, "corpus": cmd_corpus}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _configure(args)
        return COMMANDS[args.command](args, cfg)
    except _Usage as exc:
        print(f"wyvc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"wyvc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WyvError as exc:
        print(f"wyvc: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
