"""Corpus harness: valid programs verify, mutants fail, leaky programs fail the judge.

Layout under a corpus root::

    valid/*.wyv            every obligation Valid, fuzzing finds nothing
    mutants/*.wyv          some obligation Invalid; ``<stem>.expect`` names it
    leaky/*.wyv            rejected by the judge; ``labels.json`` holds verdicts
"""

from __future__ import annotations

import glob
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

from .analysis import check_imperativeness
from .config import RunConfig
from .errors import WyvError
from .semantics import ContractViolation, eval_method, fuzz_contracts
from .smt import SmtScript, SolverVerdict, check_validity, dump_script, emit_smtlib
from .syntax.ast import MethodDecl, Program, Type
from .syntax.parser import parse_program
from .vcgen import Obligation, generate_obligations


@dataclass
class ObligationResult:
    method: str
    obligation: Obligation
    verdict: SolverVerdict

    def to_json(self, timing: bool = False) -> dict:
        v = self.verdict.to_json()
        if not timing:
            v.pop("wallMillis", None)
        return {"method": self.method, "name": self.obligation.name, "tier": self.obligation.tier.value, **v}


def verify_program(program: Program, cfg: RunConfig, dump_dir: Optional[str] = None,
                   workers: int = 8) -> list[ObligationResult]:
    """Discharge every obligation of every method with the solver, concurrently."""
    jobs: list[tuple[MethodDecl, Obligation, SmtScript]] = []
    lib = cfg.library()
    for m in program.methods:
        for ob in generate_obligations(m, program):
            script = emit_smtlib(ob, lib)
            if dump_dir:
                dump_script(replace(script, name=f"{m.name}.{ob.name}"), dump_dir)
            jobs.append((m, ob, script))
    solver = cfg.solver()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        verdicts = list(pool.map(lambda j: check_validity(j[2], cfg.solver_timeout_ms, solver), jobs))
    return [ObligationResult(m.name, ob, v) for (m, ob, _), v in zip(jobs, verdicts)]


def model_args(m: MethodDecl, verdict: SolverVerdict) -> Optional[list]:
    if verdict.model is None:
        return None
    out = []
    for p in m.params:
        default = () if p.type == Type.ARRAY else (False if p.type == Type.BOOL else 0)
        out.append(verdict.model.values.get(p.name, default))
    return out


def replay_in_interpreter(program: Program, method: str, verdict: SolverVerdict):
    """Run the method on the model's parameter values; returns the RunReport or None."""
    m = program.get(method)
    args = model_args(m, verdict)
    if args is None:
        return None
    return eval_method(m, args, program=program)


@dataclass
class FileReport:
    path: str
    category: str
    ok: bool
    detail: str = ""
    data: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"path": self.path, "category": self.category, "ok": self.ok, "detail": self.detail, **self.data}


def _read(path: str) -> Program:
    with open(path) as fh:
        return parse_program(fh.read())


def check_valid_file(path: str, cfg: RunConfig) -> FileReport:
    try:
        program = _read(path)
    except WyvError as exc:
        return FileReport(path, "valid", False, f"parse: {exc}")
    results = verify_program(program, cfg)
    bad = [r for r in results if not r.verdict.valid]
    fuzz = {}
    violations = 0
    for m in program.methods:
        rep = fuzz_contracts(m, cfg.fuzz_trials, seed=cfg.seed, program=program)
        fuzz[m.name] = rep.to_json()
        violations += rep.violations
    ok = not bad and violations == 0
    detail = "" if ok else "; ".join([f"{r.method}.{r.obligation.name}: {r.verdict.kind}" for r in bad]
                                       + ([f"{violations} fuzz violations"] if violations else []))
    return FileReport(path, "valid", ok, detail, {
        "obligations": [r.to_json() for r in results], "fuzz": fuzz})


def _expected(path: str) -> dict:
    side = os.path.splitext(path)[0] + ".expect"
    with open(side) as fh:
        return json.load(fh)


def check_mutant_file(path: str, cfg: RunConfig) -> FileReport:
    try:
        program = _read(path)
        expect = _expected(path)
    except (WyvError, OSError, ValueError) as exc:
        return FileReport(path, "mutant", False, f"setup: {exc}")
    results = verify_program(program, cfg)
    invalid = [r for r in results if r.verdict.kind == "Invalid"]
    names = sorted({f"{r.method}.{r.obligation.name}" for r in invalid})
    want = expect["obligation"]
    want_method = expect.get("method", program.main.name)
    named = any(r.obligation.name == want and r.method == want_method for r in invalid)
    replayed = None
    for r in invalid:
        report = replay_in_interpreter(program, r.method, r.verdict)
        if report is not None and isinstance(report.outcome, ContractViolation):
            replayed = {"obligation": f"{r.method}.{r.obligation.name}",
                        "args": {p.name: r.verdict.model.to_json().get(p.name)
                                 for p in program.get(r.method).params},
                        "violation": report.outcome.kind,
                        "location": report.outcome.location}
            break
    ok = named and replayed is not None
    detail = "" if ok else (f"expected {want_method}.{want} Invalid, got {names or 'none'}"
                            if not named else "no model replayed to a violation")
    return FileReport(path, "mutant", ok, detail, {"invalid": names, "replay": replayed})


def check_leaky_file(path: str, labels: dict) -> FileReport:
    try:
        program = _read(path)
    except WyvError as exc:
        return FileReport(path, "leaky", False, f"parse: {exc}")
    m = program.main
    verdict = check_imperativeness(m)
    label = labels.get(os.path.basename(path))
    if label is None:
        return FileReport(path, "leaky", False, "no hand label", {"judge": verdict.to_json()})
    agree = verdict.imperative == label["imperative"] and sorted(verdict.rules) == sorted(label.get("rules", []))
    return FileReport(path, "leaky", agree and not verdict.imperative,
                      "" if agree else f"label {label}, judge rules {sorted(verdict.rules)}",
                      {"judge": verdict.to_json()})


@dataclass
class CorpusReport:
    files: list[FileReport]

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.files)

    def counts(self) -> dict:
        out: dict = {}
        for f in self.files:
            c = out.setdefault(f.category, {"total": 0, "ok": 0})
            c["total"] += 1
            c["ok"] += int(f.ok)
        return out

    def to_json(self) -> dict:
        return {"ok": self.ok, "counts": self.counts(), "files": [f.to_json() for f in self.files]}


def run_corpus(root: str, cfg: RunConfig, categories=("valid", "mutants", "leaky"),
               workers: int = 4) -> CorpusReport:
    files: list = []
    jobs = []
    if "valid" in categories:
        jobs += [(check_valid_file, p) for p in sorted(glob.glob(os.path.join(root, "valid", "*.wyv")))]
    if "mutants" in categories:
        jobs += [(check_mutant_file, p) for p in sorted(glob.glob(os.path.join(root, "mutants", "*.wyv")))]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        files = list(pool.map(lambda j: j[0](j[1], cfg), jobs))
    if "leaky" in categories:
        label_path = os.path.join(root, "leaky", "labels.json")
        labels = {}
        if os.path.exists(label_path):
            with open(label_path) as fh:
                labels = json.load(fh)
        files += [check_leaky_file(p, labels) for p in sorted(glob.glob(os.path.join(root, "leaky", "*.wyv")))]
    return CorpusReport(files)
