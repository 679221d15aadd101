"""Discrete-event simulation of a dual-criticality CPU + accelerator system.

One CPU runs one job at a time; an accelerator job keeps the accelerator
while it holds the CPU.  Scheduling decisions happen at periodic scheduler
ticks, at job completion or abort, and at budget-timer interrupts.  Every
tick stalls the platform for the scheduler's check overhead.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import accelerator as acc
from .task_model import CriticalityLevel, SystemParams, Task, TaskSet
from .trace import DEFAULT_PROFILE, CostProfile


class PreemptionMode(str, Enum):
    NON_PREEMPTIVE = "none"
    LIMITED = "limited"
    INSTRUCTION = "instr"


class Policy(str, Enum):
    MESC = "mesc"
    AMC = "amc"


class ModeState(str, Enum):
    LO_MODE = "LoMode"
    TRANSITION = "Transition"
    HI_MODE = "HiMode"


LEGAL_TRANSITIONS = {
    (ModeState.LO_MODE, ModeState.TRANSITION),
    (ModeState.TRANSITION, ModeState.HI_MODE),
    (ModeState.HI_MODE, ModeState.LO_MODE),
}


class JobStatus(str, Enum):
    READY = "ready"
    RUNNING = "running"
    PENDING = "pending"
    INTERRUPTED = "interrupted"


class DataLocation(str, Enum):
    DRAM = "dram"
    SCRATCHPAD = "scratchpad"


class SimulationInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    horizon: Optional[int] = None
    seed: int = 0
    preemption_mode: PreemptionMode = PreemptionMode.INSTRUCTION
    policy: Policy = Policy.MESC
    overrun_prob: float = 0.0
    overrun_scale: float = 2.0
    sys: SystemParams = field(default_factory=SystemParams)
    profile: CostProfile = DEFAULT_PROFILE
    bank_model: bool = True
    horizon_periods: int = 20
    max_releases: Optional[int] = 20_000
    record_events: bool = False

    def __post_init__(self):
        object.__setattr__(self, "preemption_mode", PreemptionMode(self.preemption_mode))
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not 0 <= self.overrun_prob <= 1:
            raise ValueError("overrun_prob must lie in [0, 1]")
        if self.overrun_scale <= 1:
            raise ValueError("overrun_scale must exceed 1")

    def resolve_horizon(self, gamma: TaskSet) -> int:
        if self.horizon is not None:
            return self.horizon
        if len(gamma) == 0:
            return 1
        t_max = max(t.period for t in gamma)
        h = min(gamma.hyperperiod(), self.horizon_periods * t_max)
        if self.max_releases is not None:
            # periods can span several orders of magnitude; bound the job count
            rate = sum(1.0 / t.period for t in gamma)
            h = min(h, max(1, int(self.max_releases / rate)))
        return h


@dataclass
class Tcb:
    """Per-job control block."""

    task: Task
    release: int
    deadline: int
    demand: int
    release_mode: ModeState
    executed: int = 0
    status: JobStatus = JobStatus.READY
    data_location: DataLocation = DataLocation.DRAM
    acc_context: Optional[str] = None  # None (never on the accelerator), "live" or "saved"
    dispatched: bool = False
    timer_fired: bool = False

    @property
    def timer(self) -> int:
        """Remaining budget before the next timer interrupt."""
        if self.task.is_hi and not self.timer_fired:
            return self.task.c_lo - self.executed
        return self.task.c_hi - self.executed

    @property
    def level(self) -> CriticalityLevel:
        return self.task.level


@dataclass
class SimMetrics:
    pi_inversions: list[int] = field(default_factory=list)
    ci_inversions: list[int] = field(default_factory=list)
    save_cycles: list[int] = field(default_factory=list)
    restore_cycles: list[int] = field(default_factory=list)
    released: dict[str, int] = field(default_factory=lambda: {"LO": 0, "HI": 0})
    completed: dict[str, int] = field(default_factory=lambda: {"LO": 0, "HI": 0})
    missed: dict[str, int] = field(default_factory=lambda: {"LO": 0, "HI": 0})
    dropped: dict[str, int] = field(default_factory=lambda: {"LO": 0, "HI": 0})
    in_flight: dict[str, int] = field(default_factory=lambda: {"LO": 0, "HI": 0})
    by_mode: dict[str, dict[str, dict[str, int]]] = field(default_factory=dict)
    lo_released_in_hi: int = 0
    lo_completed_in_hi: int = 0
    mode_switches: int = 0
    mode_transitions: list[tuple[int, str, str]] = field(default_factory=list)
    preemption_latencies: list[int] = field(default_factory=list)
    horizon: int = 0

    def count(self, kind: str, job: Tcb) -> None:
        lvl = job.level.value
        getattr(self, kind)[lvl] += 1
        m = self.by_mode.setdefault(job.release_mode.value, {})
        d = m.setdefault(lvl, {"released": 0, "completed": 0, "missed": 0, "dropped": 0})
        d[kind] += 1

    @property
    def success(self) -> bool:
        return sum(self.missed.values()) == 0

    @property
    def hi_success(self) -> bool:
        return self.missed["HI"] == 0

    @property
    def survivability(self) -> Optional[float]:
        if self.lo_released_in_hi == 0:
            return None
        return self.lo_completed_in_hi / self.lo_released_in_hi

    def to_dict(self) -> dict:
        return {
            "pi_inversions": self.pi_inversions,
            "ci_inversions": self.ci_inversions,
            "save_cycles": self.save_cycles,
            "restore_cycles": self.restore_cycles,
            "released": self.released,
            "completed": self.completed,
            "missed": self.missed,
            "dropped": self.dropped,
            "in_flight": self.in_flight,
            "by_mode": self.by_mode,
            "lo_released_in_hi": self.lo_released_in_hi,
            "lo_completed_in_hi": self.lo_completed_in_hi,
            "mode_switches": self.mode_switches,
            "mode_transitions": [list(x) for x in self.mode_transitions],
            "preemption_latencies": self.preemption_latencies,
            "horizon": self.horizon,
            "success": self.success,
            "hi_success": self.hi_success,
            "survivability": self.survivability,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else 0.0


# -- tick time mapping -------------------------------------------------------


class TickClock:
    """Maps wall-clock cycles to cycles available for work.

    The scheduler check stalls the platform for ``stall`` cycles at every
    multiple of ``period`` (excluding time zero).
    """

    def __init__(self, period: int, stall: int):
        if not 0 <= stall < period:
            raise ValueError("stall must be shorter than the tick period")
        self.period = period
        self.stall = stall

    def available(self, t: int) -> int:
        if self.stall == 0:
            return t
        q, r = divmod(t, self.period)
        lost = (q - 1) * self.stall + min(r, self.stall) if q >= 1 else 0
        return t - lost

    def advance(self, t: int, work: int) -> int:
        """Earliest wall time at which ``work`` more available cycles have elapsed."""
        if work <= 0:
            return t
        if self.stall == 0:
            return t + work
        a = self.available(t) + work
        if a <= self.period:
            return a
        step = self.period - self.stall
        k = -(-(a - self.period) // step)
        return a + k * self.stall

    def next_tick(self, t: int) -> int:
        return (t // self.period + 1) * self.period


# -- the simulator -----------------------------------------------------------


_IDLE, _RUN, _DRAIN, _SWITCH = "idle", "run", "drain", "switch"


class Simulator:
    def __init__(self, gamma: TaskSet, cfg: SimConfig):
        gamma.with_system(cfg.sys)
        self.gamma = gamma
        self.cfg = cfg
        self.sys = cfg.sys
        self.clock = TickClock(cfg.sys.t_sr, cfg.sys.y_cpu_check)
        self.horizon = cfg.resolve_horizon(gamma)
        self.rng = np.random.default_rng(cfg.seed)
        self.accel = acc.AcceleratorState.for_system(cfg.sys, cfg.profile)
        self.metrics = SimMetrics(horizon=self.horizon)
        self.metrics.by_mode = {}
        self.events: list[tuple[int, str, int, int]] = []
        self.t = 0
        self.mode = ModeState.LO_MODE
        self.jobs: dict[int, Tcb] = {}
        self.next_release = {t.id: 0 for t in gamma}
        self.tasks = sorted(gamma, key=lambda t: t.priority)
        self.etas = {t.id: t.banks for t in gamma}
        self.op_cuts = {
            t.id: t.trace.operator_boundaries(cfg.profile.operators_per_trace)
            for t in gamma if t.uses_accelerator
        }
        self.phase = _IDLE
        self.holder: Optional[Tcb] = None
        self.drain_target = 0
        self.switch_start = 0
        self.switch_end = 0
        self.open_inv: dict[int, tuple[int, str]] = {}
        self._sp_dirty = False
        self.waiting_since: dict[int, int] = {}

    # -- helpers ---------------------------------------------------------

    def _event(self, kind: str, task_id: int = -1, duration: int = 0) -> None:
        if self.cfg.record_events:
            self.events.append((self.t, kind, task_id, duration))

    def _fail(self, msg: str):
        raise SimulationInvariantError(f"t={self.t}: {msg}")

    def _rank(self, job: Tcb) -> tuple[int, int]:
        if self.mode is ModeState.LO_MODE:
            return (0, job.task.priority)
        return (0 if job.task.is_hi else 1, job.task.priority)

    def _resident(self, job: Tcb) -> bool:
        if not job.task.uses_accelerator:
            return False
        return self.accel.live == job.task.id or self.accel.scratchpad.committed(job.task.id) > 0

    def _resident_lo(self) -> list[int]:
        sp = self.accel.scratchpad
        out = set(t for t in sp.residents() if not self.gamma.get(t).is_hi)
        if self.accel.live is not None and not self.gamma.get(self.accel.live).is_hi:
            out.add(self.accel.live)
        return sorted(out)

    def _eligible(self, job: Tcb) -> bool:
        if self.mode is ModeState.TRANSITION and not job.task.is_hi:
            return self._resident(job) or job is self.holder
        return True

    def pick(self) -> Optional[Tcb]:
        cands = [j for j in self.jobs.values() if self._eligible(j)]
        if not cands:
            return None
        return min(cands, key=self._rank)

    def _tile(self, job: Tcb) -> tuple[int, int]:
        """(completed trace repetitions, position within the current one)."""
        return divmod(job.executed, job.task.c_lo)

    def _trace_pos(self, job: Tcb) -> int:
        # once a full pass is done every load and config has been seen
        k, r = self._tile(job)
        return job.task.c_lo if k > 0 else r

    def _preemptible(self, job: Tcb) -> bool:
        if not job.task.uses_accelerator:
            return True
        return self.cfg.preemption_mode is not PreemptionMode.NON_PREEMPTIVE

    def _drain_point(self, job: Tcb) -> int:
        if not job.task.uses_accelerator:
            return job.executed
        mode = self.cfg.preemption_mode
        if mode is PreemptionMode.NON_PREEMPTIVE:
            return job.demand
        k, r = self._tile(job)
        if r == 0:
            return job.executed
        c = job.task.c_lo
        if mode is PreemptionMode.INSTRUCTION:
            nxt = job.task.trace.next_boundary(r)
        else:
            cuts = self.op_cuts[job.task.id]
            nxt = int(cuts[np.searchsorted(cuts, r, side="left")])
        return min(k * c + nxt, job.demand)

    def _remaining_instructions(self, job: Tcb) -> int:
        k, r = self._tile(job)
        tr = job.task.trace
        left = tr.remaining_instructions(r)
        whole = (job.demand - (k + 1) * job.task.c_lo)
        if whole > 0:
            left += self.cfg.profile.queue_depth
        return left

    def _sync(self, job: Tcb) -> None:
        if job.task.uses_accelerator and self.accel.live == job.task.id:
            loaded = job.task.trace.loaded_bytes(self._trace_pos(job))
            acc.sync_loads(self.accel.scratchpad, job.task, loaded)
            if loaded:
                job.data_location = DataLocation.SCRATCHPAD

    def _config_of(self, job: Tcb) -> acc.ConfigCopyBuffer:
        return acc.ConfigCopyBuffer.from_trace_prefix(job.task.trace, self._trace_pos(job))

    def _set_mode(self, new: ModeState) -> None:
        self._sp_dirty = True
        if (self.mode, new) not in LEGAL_TRANSITIONS:
            self._fail(f"illegal mode transition {self.mode.value} -> {new.value}")
        self.metrics.mode_transitions.append((self.t, self.mode.value, new.value))
        self._event("mode_" + new.value)
        self.mode = new

    def _cleanup(self, job: Tcb) -> None:
        tid = job.task.id
        self._sp_dirty = True
        if job.task.uses_accelerator:
            acc.release_banks(self.accel.scratchpad, tid)
            self.accel.saved.pop(tid, None)
            if self.accel.live == tid:
                self.accel.live = None
                self.accel.frozen = False
        del self.jobs[tid]
        self.open_inv.pop(tid, None)
        self.waiting_since.pop(tid, None)
        if self.holder is job:
            self.holder = None
            if self.phase in (_RUN, _DRAIN):
                self.phase = _IDLE

    def _close_inversion(self, tid: int) -> None:
        start_kind = self.open_inv.pop(tid, None)
        if start_kind is not None:
            start, kind = start_kind
            if self.t > start:
                (self.metrics.pi_inversions if kind == "pi" else self.metrics.ci_inversions).append(self.t - start)

    # -- job lifecycle ---------------------------------------------------

    def _release(self, task: Task) -> None:
        demand = task.c_lo
        if task.is_hi:
            draw = self.rng.random()
            if draw < self.cfg.overrun_prob:
                demand = min(int(round(self.cfg.overrun_scale * task.c_lo)), task.c_hi)
        job = Tcb(task, self.t, self.t + task.deadline, demand, self.mode)
        self.metrics.count("released", job)
        in_hi = self.mode is not ModeState.LO_MODE
        if in_hi and not task.is_hi:
            self.metrics.lo_released_in_hi += 1
        self._event("release", task.id)
        if in_hi and not task.is_hi and self.cfg.policy is Policy.AMC:
            self.metrics.count("dropped", job)
            self._event("drop", task.id)
            return
        if task.id in self.jobs:
            self._fail(f"task {task.id} released while its previous job is still active")
        self.jobs[task.id] = job
        self.waiting_since[task.id] = self.t

    def _complete(self, job: Tcb) -> None:
        self.metrics.count("completed", job)
        if not job.task.is_hi and job.release_mode is not ModeState.LO_MODE:
            self.metrics.lo_completed_in_hi += 1
        self._event("complete", job.task.id, self.t - job.release)
        self._cleanup(job)

    def _abort(self, job: Tcb) -> None:
        self.metrics.count("missed", job)
        self._event("miss", job.task.id, self.t - job.release)
        self._close_inversion(job.task.id)
        self._cleanup(job)

    def _drop(self, job: Tcb) -> None:
        self.metrics.count("dropped", job)
        self._event("drop", job.task.id)
        self._close_inversion(job.task.id)
        self._cleanup(job)

    def _mode_switch(self) -> None:
        self.metrics.mode_switches += 1
        self._set_mode(ModeState.TRANSITION)
        if self.cfg.policy is Policy.AMC:
            for job in sorted(self.jobs.values(), key=lambda j: j.task.priority):
                if not job.task.is_hi and job is not self.holder:
                    self._drop(job)

    # -- context switching -----------------------------------------------

    def _evict_for(self, nxt: Tcb) -> int:
        """Free scratchpad room for ``nxt``; returns the cycles spent."""
        sp = self.accel.scratchpad
        cost = 0
        if self.mode is ModeState.HI_MODE and not nxt.task.is_hi:
            for tid in self._resident_lo():
                if tid != nxt.task.id:
                    cost += self._evict(tid)
        need = nxt.task.banks - sp.committed(nxt.task.id)
        while need > sp.free_banks():
            victims = [self.jobs[t] for t in sp.residents() if t != nxt.task.id and t in self.jobs]
            if not victims:
                self._fail("scratchpad full of banks owned by no active job")
            victim = max(victims, key=self._rank)
            cost += self._evict(victim.task.id)
        return cost

    def _evict(self, tid: int) -> int:
        job = self.jobs.get(tid)
        if self.accel.live == tid:
            cycles, _ = acc.context_save(self.accel, job.task, None, self.sys, self._config_of(job), force_evict=True)
            job.acc_context = "saved"
        else:
            cycles = acc.evict_resident(self.accel, tid, self.sys)
        if job is not None:
            job.data_location = DataLocation.DRAM
        self._event("evict", tid, cycles)
        return cycles

    def _start_switch(self, nxt: Tcb) -> None:
        prev = self.holder
        self._sp_dirty = True
        save = 0
        restore = 0
        if prev is not None and prev is not nxt:
            save += self.sys.y_cpu_switch
            prev.status = JobStatus.INTERRUPTED
            if prev.task.uses_accelerator and self.accel.live == prev.task.id:
                self._sync(prev)
                self.accel.frozen = True
        if nxt.task.uses_accelerator:
            live = self.accel.live
            if live is not None and live != nxt.task.id:
                other = self.jobs[live]
                self._sync(other)
                cycles, evicted = acc.context_save(
                    self.accel, other.task, nxt.task, self.sys, self._config_of(other),
                    force_evict=not self.cfg.bank_model,
                )
                other.acc_context = "saved"
                if evicted:
                    other.data_location = DataLocation.DRAM
                save += cycles
            save += self._evict_for(nxt)
        if nxt.dispatched:
            restore += self.sys.y_cpu_switch
            if nxt.task.uses_accelerator:
                if nxt.acc_context == "saved":
                    restore += acc.context_restore(self.accel, nxt.task, self.sys, self._remaining_instructions(nxt))
                elif nxt.acc_context == "live":
                    self.accel.frozen = False
                else:
                    self.accel.scratchpad.reserve(nxt.task.id, nxt.task.banks)
                    self.accel.live = nxt.task.id
                nxt.acc_context = "live"
        elif nxt.task.uses_accelerator:
            self.accel.scratchpad.reserve(nxt.task.id, nxt.task.banks)
            self.accel.live = nxt.task.id
            self.accel.frozen = False
            self.accel.config = acc.ConfigCopyBuffer()
            nxt.acc_context = "live"
        if save:
            self.metrics.save_cycles.append(save)
        if restore:
            self.metrics.restore_cycles.append(restore)
        nxt.dispatched = True
        nxt.status = JobStatus.PENDING
        if nxt.task.uses_accelerator and self.accel.scratchpad.placed_bytes.get(nxt.task.id):
            nxt.data_location = DataLocation.SCRATCHPAD
        total = save + restore
        self._event("switch", nxt.task.id, total)
        self.holder = nxt
        if total == 0:
            self._begin_run(nxt)
        else:
            self.phase = _SWITCH
            self.switch_start = self.t
            self.switch_end = self.clock.advance(self.t, total)

    def _begin_run(self, job: Tcb) -> None:
        self.phase = _RUN
        job.status = JobStatus.RUNNING
        since = self.waiting_since.pop(job.task.id, None)
        if since is not None and job.executed == 0:
            self.metrics.preemption_latencies.append(self.t - since)

    def _decide(self) -> None:
        nxt = self.pick()
        cur = self.holder if self.phase in (_RUN, _DRAIN) else None
        if nxt is None:
            if cur is None:
                self.phase = _IDLE
            return
        if cur is nxt:
            if self.phase is _DRAIN:
                self.phase = _RUN
            return
        if cur is None:
            self._start_switch(nxt)
            return
        if not self._preemptible(cur):
            return
        target = self._drain_point(cur)
        if target <= cur.executed:
            self._start_switch(nxt)
        else:
            self.phase = _DRAIN
            self.drain_target = target
            self._event("freeze", cur.task.id, target - cur.executed)

    # -- invariants --------------------------------------------------------

    def _check(self) -> None:
        sp = self.accel.scratchpad
        if self._sp_dirty:
            # the scratchpad only changes at switches and job exits
            self._sp_dirty = False
            try:
                sp.check(self.etas)
            except AssertionError as exc:
                self._fail(str(exc))
            if self.mode is ModeState.HI_MODE and len(self._resident_lo()) > 1:
                self._fail(f"{len(self._resident_lo())} LO tasks resident in HiMode")
        for job in self.jobs.values():
            if not 0 <= job.executed <= job.demand:
                self._fail(f"job of task {job.task.id} progressed outside [0, demand]")
        if self.holder is not None and self.holder.task.id not in self.jobs:
            self._fail("holder is not an active job")

    def _update_inversions(self) -> None:
        blocker = None
        if self.phase in (_RUN, _DRAIN, _SWITCH):
            blocker = self.holder
        for tid, job in self.jobs.items():
            if job is blocker:
                continue
            inverted = (blocker is not None and self._eligible(job)
                        and self._rank(blocker) > self._rank(job))
            if inverted and tid not in self.open_inv:
                kind = "ci" if (job.task.is_hi and not blocker.task.is_hi
                                and self.mode is not ModeState.LO_MODE) else "pi"
                self.open_inv[tid] = (self.t, kind)
            elif not inverted and tid in self.open_inv:
                self._close_inversion(tid)
        if blocker is not None and self.phase is not _SWITCH and blocker.task.id in self.open_inv:
            self._close_inversion(blocker.task.id)

    # -- main loop ----------------------------------------------------------

    def _next_time(self) -> int:
        cands = [self.horizon]
        nr = min(self.next_release.values(), default=self.horizon)
        cands.append(nr)
        for job in self.jobs.values():
            cands.append(job.deadline)
        h = self.holder
        if self.phase in (_RUN, _DRAIN):
            cands.append(self.clock.advance(self.t, h.demand - h.executed))
            if h.task.is_hi and not h.timer_fired and self.mode is ModeState.LO_MODE and h.demand > h.task.c_lo:
                cands.append(self.clock.advance(self.t, h.task.c_lo - h.executed))
            if self.phase is _DRAIN:
                cands.append(self.clock.advance(self.t, self.drain_target - h.executed))
        if self.phase is _SWITCH:
            cands.append(self.switch_end)
        if self._tick_matters():
            cands.append(self.clock.next_tick(self.t))
        return min(cands)

    def _tick_matters(self) -> bool:
        if self.phase is _IDLE:
            return bool(self.jobs)
        if self.phase is _RUN:
            return self._preemptible(self.holder) and self.pick() is not self.holder
        return False

    def _advance_to(self, t_next: int) -> None:
        if self.phase in (_RUN, _DRAIN):
            work = self.clock.available(t_next) - self.clock.available(self.t)
            self.holder.executed += work
        self.t = t_next

    def run(self) -> SimMetrics:
        same_time_steps = 0
        while True:
            t_next = self._next_time()
            if t_next >= self.horizon:
                self._advance_to(self.horizon)
                break
            same_time_steps = same_time_steps + 1 if t_next == self.t else 0
            if same_time_steps > 64:
                self._fail("simulation stopped making progress")
            self._advance_to(t_next)
            self._step()
            self._check()
        self._finish()
        return self.metrics

    def _step(self) -> None:
        t = self.t
        decide = False
        h = self.holder

        if self.phase is _SWITCH and t >= self.switch_end:
            if h is not None and h.task.id in self.jobs:
                self._begin_run(h)
                # a tick that fell inside the switch is served now
                decide = self.clock.next_tick(self.switch_start) <= t
            else:
                self.holder = None
                self.phase = _IDLE
                decide = True

        h = self.holder
        if self.phase in (_RUN, _DRAIN) and h is not None:
            if h.executed >= h.demand:
                self._complete(h)
                decide = True
            else:
                if (h.task.is_hi and not h.timer_fired and h.executed >= h.task.c_lo):
                    h.timer_fired = True
                    if self.mode is ModeState.LO_MODE:
                        self._event("overrun", h.task.id)
                        self._mode_switch()
                        decide = True
                if self.phase is _DRAIN and h.executed >= self.drain_target:
                    decide = True

        for job in sorted(self.jobs.values(), key=lambda j: j.task.priority):
            if job.deadline <= t:
                was_running = job is self.holder and self.phase in (_RUN, _DRAIN)
                self._abort(job)
                decide = decide or was_running

        for task in self.tasks:
            if self.next_release[task.id] == t:
                self._release(task)
                self.next_release[task.id] = t + task.period

        if t > 0 and t % self.sys.t_sr == 0 and self.phase in (_IDLE, _RUN):
            decide = True

        self._mode_bookkeeping()
        if decide and self.phase is not _SWITCH:
            self._decide()
        self._mode_bookkeeping()
        self._update_inversions()

    def _mode_bookkeeping(self) -> None:
        if self.mode is ModeState.TRANSITION and len(self._resident_lo()) <= 1:
            self._set_mode(ModeState.HI_MODE)
        if self.mode is ModeState.HI_MODE and not self.jobs and self.phase is _IDLE:
            self._set_mode(ModeState.LO_MODE)

    def _finish(self) -> None:
        for tid in list(self.open_inv):
            self._close_inversion(tid)
        for job in self.jobs.values():
            self.metrics.in_flight[job.level.value] += 1
        m = self.metrics
        for lvl in ("LO", "HI"):
            if m.released[lvl] != m.completed[lvl] + m.missed[lvl] + m.dropped[lvl] + m.in_flight[lvl]:
                self._fail(f"job accounting does not balance for {lvl} tasks")

    def events_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["timestamp", "event", "task_id", "duration"])
        w.writerows(self.events)
        return buf.getvalue()


def run(gamma: TaskSet, cfg: SimConfig) -> SimMetrics:
    return Simulator(gamma, cfg).run()


def summarize(m: SimMetrics) -> dict:
    return {
        "mean_pi": _mean(m.pi_inversions),
        "max_pi": max(m.pi_inversions, default=0),
        "mean_ci": _mean(m.ci_inversions),
        "max_ci": max(m.ci_inversions, default=0),
        "mean_save": _mean(m.save_cycles),
        "mean_restore": _mean(m.restore_cycles),
    }

