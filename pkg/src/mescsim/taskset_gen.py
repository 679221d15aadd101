"""Random task-set synthesis with UUnifast utilizations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from .bank_alloc import min_banks_static
from .task_model import CriticalityLevel, SystemParams, Task, TaskSet
from .trace import DEFAULT_PROFILE, CostProfile, make_trace

MAX_RETRIES = 100
C_LO_DISTS = ("uniform", "loguniform")


@dataclass(frozen=True)
class GenParams:
    n_tasks: int = 10
    total_util: float = 0.7
    crit_factor: float = 2.0
    crit_proportion: float = 0.5
    acc_proportion: float = 1.0
    c_lo_range: tuple[int, int] = (50_000, 5_000_000)
    footprint_range: tuple[int, int] = (4_096, 32_768)
    # "loguniform" spreads WCETs evenly across orders of magnitude
    c_lo_dist: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "c_lo_range", tuple(int(x) for x in self.c_lo_range))
        object.__setattr__(self, "footprint_range", tuple(int(x) for x in self.footprint_range))
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be positive")
        if not 0 < self.total_util <= 1:
            raise ValueError("total_util must lie in (0, 1]")
        if self.crit_factor < 1:
            raise ValueError("crit_factor must be at least 1")
        if not 0 <= self.crit_proportion <= 1:
            raise ValueError("crit_proportion must lie in [0, 1]")
        if not 0 <= self.acc_proportion <= 1:
            raise ValueError("acc_proportion must lie in [0, 1]")
        lo, hi = self.c_lo_range
        if not 0 < lo <= hi:
            raise ValueError("c_lo_range must be an increasing pair of positive cycle counts")
        if self.c_lo_dist not in C_LO_DISTS:
            raise ValueError(f"c_lo_dist must be one of {C_LO_DISTS}")
        flo, fhi = self.footprint_range
        if not 0 <= flo <= fhi:
            raise ValueError("footprint_range must be an increasing pair of byte counts")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c_lo_range"] = list(self.c_lo_range)
        d["footprint_range"] = list(self.footprint_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown generator parameters: {sorted(unknown)}")
        return cls(**d)


def uunifast(n: int, total_util: float, rng: np.random.Generator) -> list[float]:
    """Uniformly distributed utilization vector of length ``n`` summing to ``total_util``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if total_util <= 0:
        raise ValueError("total_util must be positive")
    out = []
    remaining = total_util
    for i in range(1, n):
        r = 0.0
        while r == 0.0:
            r = rng.random()
        nxt = remaining * r ** (1.0 / (n - i))
        out.append(remaining - nxt)
        remaining = nxt
    out.append(remaining)
    return out


def hi_count(n_tasks: int, crit_proportion: float) -> int:
    # tolerate float noise such as 0.3 * 10 = 3.0000000000000004
    return min(n_tasks, math.ceil(crit_proportion * n_tasks - 1e-9))


def rate_monotonic(tasks: Sequence[Task]) -> list[Task]:
    """Reassign priorities so shorter periods rank higher (ties by id)."""
    order = sorted(tasks, key=lambda t: (t.period, t.id))
    return [replace(t, priority=p) for p, t in enumerate(order, start=1)]


def generate(params: GenParams, sys: Optional[SystemParams] = None, profile: CostProfile = DEFAULT_PROFILE,
             rng: Optional[np.random.Generator] = None) -> TaskSet:
    sys = sys or SystemParams()
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    n = params.n_tasks
    lo, hi = params.c_lo_range
    if params.c_lo_dist == "loguniform":
        c_lo = [min(hi, max(lo, int(round(math.exp(x))))) for x in rng.uniform(math.log(lo), math.log(hi), size=n)]
    else:
        c_lo = [int(x) for x in rng.integers(lo, hi + 1, size=n)]

    utils = uunifast(n, params.total_util, rng)
    for _ in range(MAX_RETRIES):
        if all(round(c / u) >= c for c, u in zip(c_lo, utils)):
            break
        utils = uunifast(n, params.total_util, rng)
    else:
        raise ValueError(f"could not draw periods no shorter than WCETs after {MAX_RETRIES} tries")

    n_hi = hi_count(n, params.crit_proportion)
    hi_ids = set(int(x) for x in rng.choice(n, size=n_hi, replace=False)) if n_hi else set()
    n_acc = round(params.acc_proportion * n)
    acc_ids = set(int(x) for x in rng.choice(n, size=n_acc, replace=False)) if n_acc else set()
    flo, fhi = params.footprint_range

    tasks = []
    for k in range(n):
        period = round(c_lo[k] / utils[k])
        is_hi = k in hi_ids
        uses_acc = k in acc_ids
        footprint = int(rng.integers(flo, fhi + 1)) if uses_acc else 0
        trace = make_trace(c_lo[k], footprint, rng, profile) if uses_acc else None
        c_hi = round(params.crit_factor * c_lo[k]) if is_hi else c_lo[k]
        tasks.append(Task(
            id=k + 1,
            priority=k + 1,
            period=period,
            deadline=period,
            c_lo=c_lo[k],
            c_hi=c_hi,
            level=CriticalityLevel.HI if is_hi else CriticalityLevel.LO,
            banks=min_banks_static(footprint, sys, uses_acc),
            uses_accelerator=uses_acc,
            trace=trace,
            footprint_bytes=footprint,
        ))
    return TaskSet(rate_monotonic(tasks))
