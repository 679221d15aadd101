import numpy as np
import pytest

from mescsim.task_model import CriticalityLevel, SystemParams, Task, TaskSet
from mescsim.trace import InstructionTrace

HI = CriticalityLevel.HI
LO = CriticalityLevel.LO


def compute_trace(total, max_instr):
    """Compute-only trace of ``total`` cycles whose longest instruction is ``max_instr``."""
    cycles = []
    left = total
    while left > 0:
        c = min(max_instr, left)
        cycles.append(c)
        left -= c
    return InstructionTrace.from_cycles(cycles)


def make_task(tid, prio, period, c_lo, level=LO, c_hi=None, acc=True, max_instr=1000, banks=1, deadline=None):
    if c_hi is None:
        c_hi = c_lo
    return Task(
        id=tid,
        priority=prio,
        period=period,
        deadline=deadline or period,
        c_lo=c_lo,
        c_hi=c_hi,
        level=level,
        banks=banks if acc else 0,
        uses_accelerator=acc,
        trace=compute_trace(c_lo, max_instr) if acc else None,
    )


@pytest.fixture
def two_task_system():
    """The hand-derived pair: tau1 (acc, C=10000, T=100000) above tau2 (C=20000)."""
    t1 = make_task(1, 1, 100_000, 10_000, acc=True, max_instr=1000)
    t2 = make_task(2, 2, 100_000, 20_000, acc=True, max_instr=3000)
    sys = SystemParams(t_sr=5000, y_acc_save=1000, y_acc_restore=1000, y_cpu_check=100, y_cpu_switch=0)
    return TaskSet([t1, t2]), sys


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
