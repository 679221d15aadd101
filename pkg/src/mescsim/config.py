"""JSON run configuration shared by the CLI subcommands.

Layout (every section optional)::

    {"system": {...}, "profile": {...}, "gen": {...}, "sim": {...},
     "experiment": {...}, "count": 1}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .experiment import ExperimentSpec, spec_from_dict
from .simulator import SimConfig
from .task_model import SystemParams
from .taskset_gen import GenParams
from .trace import CostProfile

SECTIONS = {"system", "profile", "gen", "sim", "experiment", "count"}
SIM_KEYS = {"horizon", "seed", "preemption_mode", "policy", "overrun_prob", "overrun_scale", "bank_model",
            "horizon_periods", "max_releases"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: SystemParams = field(default_factory=SystemParams)
    profile: CostProfile = field(default_factory=CostProfile)
    gen: GenParams = field(default_factory=GenParams)
    sim: SimConfig = field(default_factory=SimConfig)
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)
    count: int = 1


def _profile_from(d: dict) -> CostProfile:
    known = {f.name for f in fields(CostProfile)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown profile parameters: {sorted(unknown)}")
    p = CostProfile(**d)
    p.validate()
    return p


def load_config(doc: Optional[dict]) -> RunConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        system = SystemParams.from_dict(doc.get("system", {}))
        profile = _profile_from(doc.get("profile", {}))
        gen = GenParams.from_dict(doc.get("gen", {}))
        sim_doc = doc.get("sim", {})
        bad = set(sim_doc) - SIM_KEYS
        if bad:
            raise ConfigError(f"unknown sim parameters: {sorted(bad)}")
        sim = SimConfig(sys=system, profile=profile, **sim_doc)
        exp = spec_from_dict(doc.get("experiment", {}), sim=sim, gen=gen)
        count = int(doc.get("count", 1))
        if count < 1:
            raise ConfigError("count must be positive")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(system, profile, gen, sim, exp, count)


def read_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return load_config({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return load_config(doc)
