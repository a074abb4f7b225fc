"""Attempt schedules for prover agents and their cost accounting.

A schedule turns "try this goal again" into *stages*: the attempts inside
a stage run side by side, stages run one after another. Cost is measured
two ways:

* compute: the number of attempts that were paid for;
* latency: the number of stages on the critical path.

Iterative deepening (1, 1, 2, 4, 8, ...) cancels the rest of a stage once
one attempt in it succeeds; cancelled attempts cost nothing. Parallel(k)
launches k attempts per stage and pays for all of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class Sequential:
    kind = "sequential"
    cancel_in_stage = True

    def sizes(self) -> Iterator[int]:
        while True:
            yield 1

    def label(self) -> str:
        return "seq"


@dataclass(frozen=True)
class Parallel:
    k: int
    kind = "parallel"
    cancel_in_stage = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("Parallel(k) needs k >= 1")

    def sizes(self) -> Iterator[int]:
        while True:
            yield self.k

    def label(self) -> str:
        return f"par{self.k}"


@dataclass(frozen=True)
class IterativeDeepening:
    """Given stage sizes, then the last size doubled forever."""

    stages: tuple[int, ...] = (1, 1, 2, 4)
    kind = "iterative-deepening"
    cancel_in_stage = True

    def __post_init__(self):
        if not self.stages or any(s < 1 for s in self.stages):
            raise ValueError("stage sizes must be nonempty and >= 1")

    def sizes(self) -> Iterator[int]:
        yield from self.stages
        s = self.stages[-1]
        while True:
            s *= 2
            yield s

    def label(self) -> str:
        return "id"


Schedule = Union[Sequential, Parallel, IterativeDeepening]


def parse_schedule(text: str) -> Schedule:
    """``seq``, ``parK`` / ``parallel:K``, ``id`` / ``id:1+1+2+4``."""
    t = text.strip().lower()
    if t in ("seq", "sequential"):
        return Sequential()
    if t.startswith("parallel:"):
        return Parallel(int(t.split(":", 1)[1]))
    if t.startswith("par"):
        return Parallel(int(t[3:]))
    if t in ("id", "iterative-deepening"):
        return IterativeDeepening()
    if t.startswith("id:"):
        return IterativeDeepening(tuple(int(x) for x in t[3:].split("+")))
    raise ValueError(f"unknown schedule {text!r}")


def schedule_to_json(s) -> dict:
    out = {"kind": s.kind}
    if isinstance(s, Parallel):
        out["k"] = s.k
    if isinstance(s, IterativeDeepening):
        out["stages"] = list(s.stages)
    return out


# ----------------------------------------------------------- stage logic


def settle_stage(decisive: Sequence[bool], cancel: bool) -> int:
    """How many attempts of a stage are paid for.

    ``decisive[j]`` says attempt j ended the goal (Success or Change).
    With in-stage cancellation, attempts after the first decisive one are
    dropped.
    """
    if cancel:
        for j, d in enumerate(decisive):
            if d:
                return j + 1
    return len(decisive)


@dataclass(frozen=True)
class GoalCost:
    compute: int
    stages: int
    succeeded: bool


def run_goal(schedule, attempt: Callable[[int], bool], max_attempts: Optional[int] = None) -> GoalCost:
    """Drive one goal through ``schedule``; ``attempt(n)`` is the n-th try (1-based)."""
    n = 0
    compute = stages = 0
    for size in schedule.sizes():
        if max_attempts is not None and n >= max_attempts:
            return GoalCost(compute, stages, False)
        if max_attempts is not None:
            size = min(size, max_attempts - n)
        results = [attempt(n + j + 1) for j in range(size)]
        n += size
        stages += 1
        paid = settle_stage(results, schedule.cancel_in_stage)
        compute += paid
        if any(results):
            return GoalCost(compute, stages, True)
    raise AssertionError("unreachable")


# ----------------------------------------------------------- simulation


@dataclass(frozen=True)
class SimResult:
    schedule: str
    p: float
    goals: int
    mean_compute: float
    se_compute: float
    mean_latency: float
    se_latency: float

    def to_json(self) -> dict:
        return {k: (round(v, 4) if isinstance(v, float) else v) for k, v in self.__dict__.items()}


def simulate(schedule, p: float, goals: int = 10_000, seed: int = 0) -> SimResult:
    """Monte-Carlo: each attempt succeeds independently with probability ``p``."""
    rng = np.random.default_rng(seed)
    compute = np.empty(goals)
    latency = np.empty(goals)
    for g in range(goals):
        draws: list[bool] = []

        def attempt(n: int) -> bool:
            while len(draws) < n:
                draws.extend((rng.random(64) < p).tolist())
            return draws[n - 1]

        cost = run_goal(schedule, attempt)
        compute[g] = cost.compute
        latency[g] = cost.stages
    return SimResult(schedule.label(), p, goals,
                     float(compute.mean()), float(compute.std(ddof=1) / math.sqrt(goals)),
                     float(latency.mean()), float(latency.std(ddof=1) / math.sqrt(goals)))


# ----------------------------------------------------------- closed forms


def _cumulative(schedule, q: float, tol: float = 1e-15) -> Iterator[tuple[int, int]]:
    """(stage size, attempts before the stage) until q**before is negligible."""
    before = 0
    for size in schedule.sizes():
        if q ** before < tol and before > 0:
            return
        yield size, before
        before += size


def expected_latency(schedule, p: float) -> float:
    """E[stages] = sum over stages j of P(no success before stage j)."""
    q = 1.0 - p
    return sum(q ** before for _, before in _cumulative(schedule, q))


def expected_compute(schedule, p: float) -> float:
    """E[paid attempts], summed stage by stage.

    A stage that is reached costs its full size without cancellation; with
    cancellation it costs the index of the first success, or the size.
    """
    q = 1.0 - p
    total = 0.0
    for size, before in _cumulative(schedule, q):
        reach = q ** before
        if schedule.cancel_in_stage:
            # E[min(first success index, size)] = sum_{j<size} q^j
            stage = (1 - q ** size) / p if p > 0 else size
        else:
            stage = size
        total += reach * stage
    return total
