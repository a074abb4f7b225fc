"""Run configuration: ``wyvc.toml`` plus ``WYVC_*`` environment overrides."""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .schedule import parse_schedule
from .smt import DEFAULT_TIMEOUT_MS, SolverConfig
from .speclib import DEFAULT_LIBRARY, SpecLibraryConfig

CONFIG_FILE = "wyvc.toml"


@dataclass
class RunConfig:
    solver_path: Optional[str] = None
    solver_timeout_ms: int = DEFAULT_TIMEOUT_MS
    schedule: str = "id:1+1+2+4"
    agents: list[str] = field(default_factory=lambda: ["smt"])
    mode: str = "decomposition"  # or "sequential"
    budget: int = 64  # N: total agent calls for decomposition
    turns: int = 3  # T: sequential turns
    k: int = 4  # width used by parK schedules and pass@k
    max_stages: int = 4
    disabled_lemmas: list[str] = field(default_factory=list)
    seed: int = 0
    fuzz_trials: int = 1000
    endpoints: dict = field(default_factory=dict)

    def solver(self) -> SolverConfig:
        return SolverConfig(self.solver_path, self.solver_timeout_ms)

    def library(self) -> SpecLibraryConfig:
        return DEFAULT_LIBRARY.without(*self.disabled_lemmas)

    def schedule_obj(self):
        return parse_schedule(self.schedule)

    def to_json(self) -> dict:
        return asdict(self)


_TABLES = {
    ("solver", "path"): "solver_path",
    ("solver", "timeout_ms"): "solver_timeout_ms",
    ("schedule", "kind"): "schedule",
    ("agents", "roster"): "agents",
    ("agents", "mode"): "mode",
    ("budget", "agent_calls"): "budget",
    ("budget", "turns"): "turns",
    ("budget", "k"): "k",
    ("budget", "max_stages"): "max_stages",
    ("library", "disabled"): "disabled_lemmas",
    ("run", "seed"): "seed",
    ("run", "fuzz_trials"): "fuzz_trials",
}

_ENV = {
    "WYVC_SOLVER": ("solver_path", str),
    "WYVC_SOLVER_TIMEOUT_MS": ("solver_timeout_ms", int),
    "WYVC_SCHEDULE": ("schedule", str),
    "WYVC_AGENTS": ("agents", lambda s: [x.strip() for x in s.split(",") if x.strip()]),
    "WYVC_MODE": ("mode", str),
    "WYVC_BUDGET": ("budget", int),
    "WYVC_TURNS": ("turns", int),
    "WYVC_K": ("k", int),
    "WYVC_DISABLED_LEMMAS": ("disabled_lemmas", lambda s: [x.strip() for x in s.split(",") if x.strip()]),
    "WYVC_SEED": ("seed", int),
}


def load_config(path: Optional[str] = None, env: Optional[Mapping[str, str]] = None,
                search_dir: Optional[str] = None) -> RunConfig:
    """Defaults, then the TOML file (explicit path or ``wyvc.toml`` in ``search_dir``), then env."""
    env = os.environ if env is None else env
    cfg = RunConfig()
    if path is None and search_dir is not None:
        cand = os.path.join(search_dir, CONFIG_FILE)
        path = cand if os.path.exists(cand) else None
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        for (table, key), attr in _TABLES.items():
            if key in data.get(table, {}):
                setattr(cfg, attr, data[table][key])
        sched = data.get("schedule", {})
        if "stages" in sched and cfg.schedule.startswith("id"):
            cfg.schedule = "id:" + "+".join(str(int(x)) for x in sched["stages"])
        cfg.endpoints = dict(data.get("endpoints", {}))
    for var, (attr, conv) in _ENV.items():
        if env.get(var):
            setattr(cfg, attr, conv(env[var]))
    parse_schedule(cfg.schedule)  # fail early on typos
    return cfg
