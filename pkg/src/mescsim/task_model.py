"""Tasks, task sets, platform parameters and the set helpers used by analysis."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from functools import reduce
from typing import Iterable, Iterator, Optional

from .trace import InstructionTrace


class CriticalityLevel(str, Enum):
    LO = "LO"
    HI = "HI"


@dataclass(frozen=True)
class SystemParams:
    """Scheduler interval, overhead constants and accelerator geometry.

    The default save/restore overheads are the worst-case cycle counts the
    accelerator cost model can charge for one switch (see
    ``accelerator.worst_case_overheads``), so analysis bounds what the
    simulator does.
    """

    t_sr: int = 5_000
    y_acc_save: int = 22_080
    y_acc_restore: int = 22_208
    y_cpu_check: int = 100
    y_cpu_switch: int = 200
    total_banks: int = 8
    bank_size: int = 32_768
    remap_block_size: int = 4_096
    accumulator_size: int = 65_536

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.t_sr <= 0:
            raise ValueError("t_sr must be positive")
        if self.total_banks < 1:
            raise ValueError("total_banks must be at least 1")
        if self.bank_size < 1:
            raise ValueError("bank_size must be positive")
        if self.y_cpu_check >= self.t_sr:
            raise ValueError("y_cpu_check must be shorter than t_sr or the CPU never runs tasks")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown system parameters: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Task:
    id: int
    priority: int
    period: int
    deadline: int
    c_lo: int
    c_hi: int
    level: CriticalityLevel
    banks: int = 0
    uses_accelerator: bool = False
    trace: Optional[InstructionTrace] = None
    footprint_bytes: int = 0
    max_instr_cycles: int = field(init=False)

    def __post_init__(self):
        if not isinstance(self.level, CriticalityLevel):
            object.__setattr__(self, "level", CriticalityLevel(self.level))
        if self.period <= 0 or self.deadline <= 0:
            raise ValueError(f"task {self.id}: period and deadline must be positive")
        if self.deadline > self.period:
            raise ValueError(f"task {self.id}: deadline exceeds period")
        if self.c_lo <= 0:
            raise ValueError(f"task {self.id}: c_lo must be positive")
        if self.c_hi < self.c_lo:
            raise ValueError(f"task {self.id}: c_hi < c_lo")
        if self.banks < 0:
            raise ValueError(f"task {self.id}: negative bank demand")
        if self.uses_accelerator:
            if self.trace is None:
                raise ValueError(f"task {self.id}: accelerator task without a trace")
            if self.trace.total_cycles != self.c_lo:
                raise ValueError(
                    f"task {self.id}: trace realizes {self.trace.total_cycles} cycles, c_lo is {self.c_lo}"
                )
            if self.banks < 1:
                raise ValueError(f"task {self.id}: accelerator task needs at least one bank")
            object.__setattr__(self, "max_instr_cycles", self.trace.max_cycles)
        else:
            if self.trace is not None:
                raise ValueError(f"task {self.id}: CPU-only task carries a trace")
            object.__setattr__(self, "max_instr_cycles", 0)

    @property
    def is_hi(self) -> bool:
        return self.level is CriticalityLevel.HI

    @property
    def utilization(self) -> float:
        return self.c_lo / self.period

    def __eq__(self, other):
        if not isinstance(other, Task):
            return NotImplemented
        return self._key() == other._key() and self.trace == other.trace

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        return (self.id, self.priority, self.period, self.deadline, self.c_lo, self.c_hi,
                self.level, self.banks, self.uses_accelerator, self.footprint_bytes)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "priority": self.priority,
            "period": self.period,
            "deadline": self.deadline,
            "c_lo": self.c_lo,
            "c_hi": self.c_hi,
            "level": self.level.value,
            "banks": self.banks,
            "uses_accelerator": self.uses_accelerator,
            "footprint_bytes": self.footprint_bytes,
        }
        if self.trace is not None:
            d["trace"] = self.trace.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Task":
        trace = InstructionTrace.from_dict(d["trace"]) if d.get("trace") is not None else None
        return cls(
            id=int(d["id"]),
            priority=int(d["priority"]),
            period=int(d["period"]),
            deadline=int(d["deadline"]),
            c_lo=int(d["c_lo"]),
            c_hi=int(d["c_hi"]),
            level=CriticalityLevel(d["level"]),
            banks=int(d.get("banks", 0)),
            uses_accelerator=bool(d.get("uses_accelerator", trace is not None)),
            trace=trace,
            footprint_bytes=int(d.get("footprint_bytes", 0)),
        )


class TaskSet:
    """An immutable set of tasks with unique ids and a total priority order."""

    def __init__(self, tasks: Iterable[Task] = ()):
        self.tasks: tuple[Task, ...] = tuple(tasks)
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids")
        prios = [t.priority for t in self.tasks]
        if len(set(prios)) != len(prios):
            raise ValueError("duplicate priorities")
        self._by_id = {t.id: t for t in self.tasks}

    def __len__(self):
        return len(self.tasks)

    def __iter__(self) -> Iterator[Task]:
        return iter(self.tasks)

    def __contains__(self, task_id) -> bool:
        return task_id in self._by_id

    def __eq__(self, other):
        if not isinstance(other, TaskSet):
            return NotImplemented
        return self.tasks == other.tasks

    def __repr__(self):
        return f"TaskSet({[t.id for t in self.tasks]})"

    def get(self, task_id: int) -> Task:
        try:
            return self._by_id[task_id]
        except KeyError:
            raise KeyError(f"no task with id {task_id}") from None

    def ids(self) -> set[int]:
        return set(self._by_id)

    def by_priority(self) -> list[Task]:
        return sorted(self.tasks, key=lambda t: t.priority)

    def union(self, *others: "TaskSet") -> "TaskSet":
        merged = dict(self._by_id)
        for o in others:
            merged.update(o._by_id)
        return TaskSet(sorted(merged.values(), key=lambda t: t.priority))

    @property
    def utilization(self) -> float:
        return sum(t.utilization for t in self.tasks)

    def hyperperiod(self) -> int:
        return reduce(math.lcm, (t.period for t in self.tasks), 1)

    def with_system(self, sys: SystemParams) -> None:
        """Raise if any task demands more banks than the platform has."""
        for t in self.tasks:
            if t.banks > sys.total_banks:
                raise ValueError(f"task {t.id} needs {t.banks} banks, platform has {sys.total_banks}")

    def to_json(self, extra: Optional[dict] = None) -> str:
        doc = {"tasks": [t.to_dict() for t in self.tasks]}
        if extra:
            doc.update(extra)
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "TaskSet":
        doc = json.loads(text)
        if isinstance(doc, list):
            items = doc
        elif isinstance(doc, dict) and isinstance(doc.get("tasks"), list):
            items = doc["tasks"]
        else:
            raise ValueError("task set document must be a list or an object with a 'tasks' list")
        return cls(Task.from_dict(d) for d in items)


def partition(gamma: TaskSet, task_id: int) -> tuple[TaskSet, TaskSet, TaskSet, TaskSet]:
    """Split the other tasks into (hpH, hpL, lpH, lpL) relative to ``task_id``."""
    me = gamma.get(task_id)
    hp_hi, hp_lo, lp_hi, lp_lo = [], [], [], []
    for t in gamma:
        if t.id == me.id:
            continue
        higher = t.priority < me.priority
        if t.is_hi:
            (hp_hi if higher else lp_hi).append(t)
        else:
            (hp_lo if higher else lp_lo).append(t)
    return TaskSet(hp_hi), TaskSet(hp_lo), TaskSet(lp_hi), TaskSet(lp_lo)


def filter_acc(gamma: TaskSet) -> TaskSet:
    return TaskSet(t for t in gamma if t.uses_accelerator)


def filter_cpu(gamma: TaskSet) -> TaskSet:
    return TaskSet(t for t in gamma if not t.uses_accelerator)


def longest_instr(gamma: TaskSet) -> int:
    """Longest single accelerator instruction in the set; 0 if there is none."""
    return max((t.max_instr_cycles for t in gamma if t.uses_accelerator), default=0)


def with_priorities(tasks: Iterable[Task], priorities: Iterable[int]) -> list[Task]:
    return [replace(t, priority=p) for t, p in zip(tasks, priorities)]
