"""Blocking terms and fixed-point response-time analysis for dual-criticality
task sets sharing one preemptible accelerator.

All quantities are integer cycles.  A response time of ``None`` means the
iteration passed the deadline before converging (unschedulable).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

from .task_model import SystemParams, TaskSet, filter_acc, filter_cpu, longest_instr, partition

MAX_ITERATIONS = 1_000_000
CSV_SCHEMA = "mescsim-analysis/1"
CSV_FIELDS = ["id", "level", "pb_lo", "b_lo", "r_lo", "pb_hi", "cb_hi", "b_hi", "r_hi", "r_star", "verdict"]


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def pb_lo(i: int, gamma: TaskSet, sys: SystemParams) -> int:
    _, _, lp_hi, lp_lo = partition(gamma, i)
    return longest_instr(filter_acc(lp_hi.union(lp_lo))) + sys.t_sr


def b_lo(i: int, gamma: TaskSet, sys: SystemParams) -> int:
    # no criticality inversion can happen in LO mode
    return pb_lo(i, gamma, sys)


def pb_hi(i: int, gamma: TaskSet, sys: SystemParams) -> int:
    _, _, lp_hi, _ = partition(gamma, i)
    return longest_instr(filter_acc(lp_hi)) + sys.t_sr


def cb_hi(i: int, gamma: TaskSet, sys: SystemParams) -> int:
    _, hp_lo, _, lp_lo = partition(gamma, i)
    return longest_instr(filter_acc(lp_lo.union(hp_lo))) + sys.t_sr


def b_hi(i: int, gamma: TaskSet, sys: SystemParams) -> int:
    _, hp_lo, lp_hi, lp_lo = partition(gamma, i)
    return longest_instr(filter_acc(lp_lo.union(hp_lo, lp_hi))) + sys.t_sr


def blocking_star(i: int, gamma: TaskSet, sys: SystemParams) -> tuple[int, int, int]:
    """Transition-window blocking, identical to the HI-mode terms."""
    return pb_hi(i, gamma, sys), cb_hi(i, gamma, sys), b_hi(i, gamma, sys)


def fixed_point(f: Callable[[int], int], start: int, deadline: int) -> Optional[int]:
    """Least fixed point of a monotone ``f`` reached from ``start``, or None past ``deadline``."""
    r = start
    for _ in range(MAX_ITERATIONS):
        if r > deadline:
            return None
        nxt = f(r)
        if nxt == r:
            return r
        if nxt < r:
            raise ArithmeticError("response-time recurrence is not monotone")
        r = nxt
    raise RuntimeError(f"no fixed point within {MAX_ITERATIONS} iterations")


def _switch_costs(sys: SystemParams) -> tuple[int, int]:
    """(per preemption by a CPU-only task, per preemption by an accelerator task)."""
    return 2 * sys.y_cpu_switch, sys.y_acc_save + sys.y_acc_restore


def lo_equation(i: int, gamma: TaskSet, sys: SystemParams) -> Callable[[int], int]:
    me = gamma.get(i)
    hp_hi, hp_lo, _, _ = partition(gamma, i)
    hp = hp_hi.union(hp_lo)
    cpu_cost, acc_cost = _switch_costs(sys)
    base = b_lo(i, gamma, sys) + me.c_lo + sys.y_acc_save + sys.y_acc_restore
    terms = [(t.period, cpu_cost + t.c_lo) for t in filter_cpu(hp)]
    terms += [(t.period, acc_cost + t.c_lo) for t in filter_acc(hp)]

    def f(r: int) -> int:
        total = base + _ceil_div(r, sys.t_sr) * sys.y_cpu_check
        for period, cost in terms:
            total += _ceil_div(r, period) * cost
        return total

    f.start = base  # type: ignore[attr-defined]
    return f


def hi_equation(i: int, gamma: TaskSet, sys: SystemParams) -> Callable[[int], int]:
    me = gamma.get(i)
    hp_hi, _, _, _ = partition(gamma, i)
    cpu_cost, acc_cost = _switch_costs(sys)
    base = b_hi(i, gamma, sys) + me.c_hi + sys.y_acc_save + sys.y_acc_restore
    terms = [(t.period, cpu_cost + t.c_hi) for t in filter_cpu(hp_hi)]
    terms += [(t.period, acc_cost + t.c_hi) for t in filter_acc(hp_hi)]

    def f(r: int) -> int:
        total = base + _ceil_div(r, sys.t_sr) * sys.y_cpu_check
        for period, cost in terms:
            total += _ceil_div(r, period) * cost
        return total

    f.start = base  # type: ignore[attr-defined]
    return f


def star_equation(i: int, gamma: TaskSet, sys: SystemParams, r_lo_i: int) -> Callable[[int], int]:
    """Transition recurrence; LO interference is counted over the LO-mode window ``r_lo_i``."""
    me = gamma.get(i)
    hp_hi, hp_lo, _, _ = partition(gamma, i)
    cpu_cost, acc_cost = _switch_costs(sys)
    _, _, b_star = blocking_star(i, gamma, sys)
    base = b_star + me.c_hi + sys.y_acc_save + sys.y_acc_restore
    for t in filter_cpu(hp_lo):
        base += _ceil_div(r_lo_i, t.period) * (cpu_cost + t.c_lo)
    for t in filter_acc(hp_lo):
        base += _ceil_div(r_lo_i, t.period) * (acc_cost + t.c_lo)
    terms = [(t.period, cpu_cost + t.c_hi) for t in filter_cpu(hp_hi)]
    terms += [(t.period, acc_cost + t.c_hi) for t in filter_acc(hp_hi)]

    def f(r: int) -> int:
        total = base + _ceil_div(r, sys.t_sr) * sys.y_cpu_check
        for period, cost in terms:
            total += _ceil_div(r, period) * cost
        return total

    f.start = base  # type: ignore[attr-defined]
    return f


def response_lo(i: int, gamma: TaskSet, sys: SystemParams) -> Optional[int]:
    f = lo_equation(i, gamma, sys)
    return fixed_point(f, f.start, gamma.get(i).deadline)


def response_hi(i: int, gamma: TaskSet, sys: SystemParams) -> Optional[int]:
    if not gamma.get(i).is_hi:
        raise ValueError(f"task {i} is not a HI task")
    f = hi_equation(i, gamma, sys)
    return fixed_point(f, f.start, gamma.get(i).deadline)


def response_star(i: int, gamma: TaskSet, sys: SystemParams, r_lo_i: Optional[int]) -> Optional[int]:
    if not gamma.get(i).is_hi:
        raise ValueError(f"task {i} is not a HI task")
    if r_lo_i is None:
        return None
    f = star_equation(i, gamma, sys, r_lo_i)
    return fixed_point(f, f.start, gamma.get(i).deadline)


@dataclass
class TaskAnalysis:
    id: int
    level: str
    deadline: int
    pb_lo: int
    b_lo: int
    r_lo: Optional[int]
    pb_hi: Optional[int] = None
    cb_hi: Optional[int] = None
    b_hi: Optional[int] = None
    r_hi: Optional[int] = None
    pb_star: Optional[int] = None
    cb_star: Optional[int] = None
    b_star: Optional[int] = None
    r_star: Optional[int] = None

    @property
    def schedulable(self) -> bool:
        if self.r_lo is None:
            return False
        if self.level == "HI":
            return self.r_hi is not None and self.r_star is not None
        return True


@dataclass
class AnalysisResult:
    tasks: list[TaskAnalysis] = field(default_factory=list)

    @property
    def schedulable(self) -> bool:
        return all(t.schedulable for t in self.tasks)

    @property
    def diverged(self) -> set[int]:
        return {t.id for t in self.tasks if not t.schedulable}

    def for_task(self, task_id: int) -> TaskAnalysis:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema={CSV_SCHEMA}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for t in self.tasks:
            row = [t.id, t.level, t.pb_lo, t.b_lo, t.r_lo, t.pb_hi, t.cb_hi, t.b_hi, t.r_hi, t.r_star,
                   "schedulable" if t.schedulable else "unschedulable"]
            w.writerow(["" if v is None else v for v in row])
        return buf.getvalue()


def analyze(gamma: TaskSet, sys: SystemParams) -> AnalysisResult:
    out = AnalysisResult()
    for task in gamma.by_priority():
        i = task.id
        pb = pb_lo(i, gamma, sys)
        rec = TaskAnalysis(i, task.level.value, task.deadline, pb, b_lo(i, gamma, sys), response_lo(i, gamma, sys))
        if task.is_hi:
            rec.pb_hi = pb_hi(i, gamma, sys)
            rec.cb_hi = cb_hi(i, gamma, sys)
            rec.b_hi = b_hi(i, gamma, sys)
            rec.pb_star, rec.cb_star, rec.b_star = blocking_star(i, gamma, sys)
            rec.r_hi = response_hi(i, gamma, sys)
            rec.r_star = response_star(i, gamma, sys, rec.r_lo)
        out.tasks.append(rec)
    return out


def is_schedulable(gamma: TaskSet, sys: SystemParams) -> bool:
    """Early-exit schedulability verdict."""
    for task in gamma:
        r_lo = response_lo(task.id, gamma, sys)
        if r_lo is None:
            return False
        if task.is_hi:
            if response_hi(task.id, gamma, sys) is None:
                return False
            if response_star(task.id, gamma, sys, r_lo) is None:
                return False
    return True
