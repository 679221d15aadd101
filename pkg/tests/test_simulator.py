from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mescsim import accelerator as acc
from mescsim.simulator import (
    LEGAL_TRANSITIONS,
    ModeState,
    Policy,
    PreemptionMode,
    SimConfig,
    SimMetrics,
    Simulator,
    Tcb,
    TickClock,
    run,
    summarize,
)
from mescsim.task_model import SystemParams, TaskSet
from mescsim.taskset_gen import GenParams, generate
from mescsim.trace import make_trace

from conftest import HI, LO, make_task

SYS = SystemParams()


# -- tick clock --------------------------------------------------------------

def _brute_available(t, period, stall):
    return sum(1 for c in range(t) if not (c >= period and c % period < stall))


@settings(max_examples=60, deadline=None)
@given(period=st.integers(2, 12), stall=st.integers(0, 11), t=st.integers(0, 120), work=st.integers(0, 60))
def test_tick_clock_matches_cycle_count(period, stall, t, work):
    stall = stall % period
    clock = TickClock(period, stall)
    assert clock.available(t) == _brute_available(t, period, stall)
    end = clock.advance(t, work)
    target = clock.available(t) + work
    assert clock.available(end) == target
    assert end == t or clock.available(end - 1) < target


def test_tick_clock_rejects_long_stall():
    with pytest.raises(ValueError):
        TickClock(100, 100)


# -- basic runs ----------------------------------------------------------------

def _events(sim, kind, tid=None):
    return [e for e in sim.events if e[1] == kind and (tid is None or e[2] == tid)]


def test_single_task_half_utilization():
    g = TaskSet([make_task(1, 1, 20_000, 10_000)])
    m = run(g, SimConfig(horizon=200_000))
    assert m.released == {"LO": 10, "HI": 0}
    assert m.completed == {"LO": 10, "HI": 0}
    assert m.success
    assert m.pi_inversions == [] and m.ci_inversions == []


def test_empty_set_runs():
    m = run(TaskSet(), SimConfig(horizon=1000))
    assert m.released == {"LO": 0, "HI": 0}


def _pair():
    """Low-priority long job that the high-priority task's second release lands in."""
    hi = make_task(1, 1, 150_001, 10_000, max_instr=1000)
    lo = make_task(2, 2, 1_000_000, 200_000, max_instr=3000)
    return TaskSet([hi, lo])


def test_instruction_level_inversion_bound():
    sim = Simulator(_pair(), SimConfig(horizon=200_000, record_events=True))
    m = sim.run()
    assert len(m.pi_inversions) == 1
    save = max(m.save_cycles)
    # wait for the tick, drain the in-flight instruction, save, plus stalls on the way
    stalls = (SYS.t_sr + 3000 + save) // SYS.t_sr + 1
    assert m.pi_inversions[0] <= 3000 + SYS.t_sr + save + stalls * SYS.y_cpu_check
    assert m.success


def test_non_preemptive_inversion_is_remaining_execution():
    sim = Simulator(_pair(), SimConfig(horizon=400_000, preemption_mode="none", record_events=True))
    m = sim.run()
    start = _events(sim, "complete", 1)[0][0]
    done = sim.clock.advance(start, 200_000)
    assert _events(sim, "complete", 2)[0][0] == done
    assert m.pi_inversions == [done - 150_001]


def test_fresh_then_restore_switch():
    sim = Simulator(_pair(), SimConfig(horizon=200_000, record_events=True))
    m = sim.run()
    # the preempting job starts fresh: only the outgoing context is saved
    assert m.save_cycles == [SYS.y_cpu_switch + acc.fixed_save_cycles(SYS)]
    # the preempted job comes back through the restore path
    assert len(m.restore_cycles) == 1
    base = SYS.y_cpu_switch + acc.fixed_restore_cycles(SYS)
    assert base <= m.restore_cycles[0] <= base + 16 * 10


def test_cpu_only_preemption_costs_two_switches():
    hi = make_task(1, 1, 150_001, 10_000, acc=False)
    lo = make_task(2, 2, 1_000_000, 200_000, acc=False)
    m = run(TaskSet([hi, lo]), SimConfig(horizon=200_000))
    assert m.save_cycles == [SYS.y_cpu_switch]
    assert m.restore_cycles == [SYS.y_cpu_switch]


# -- scheduler decisions --------------------------------------------------------

def _sim_with_jobs(tasks, mode=ModeState.LO_MODE):
    sim = Simulator(TaskSet(tasks), SimConfig(horizon=10**6))
    for t in tasks:
        sim.jobs[t.id] = Tcb(t, 0, t.deadline, t.c_lo, mode)
    sim.mode = mode
    return sim


def test_criticality_dominates_in_hi_mode():
    lo = make_task(1, 1, 10**6, 10_000, LO)
    hi = make_task(2, 2, 10**6, 10_000, HI, c_hi=20_000)
    sim = _sim_with_jobs([lo, hi], ModeState.HI_MODE)
    assert sim.pick().task.id == 2
    sim.mode = ModeState.LO_MODE
    assert sim.pick().task.id == 1


def test_transition_only_admits_resident_lo():
    a = make_task(1, 1, 10**6, 10_000, LO)
    b = make_task(2, 2, 10**6, 10_000, LO)
    sim = _sim_with_jobs([a, b], ModeState.TRANSITION)
    assert sim.pick() is None
    sim.accel.scratchpad.reserve(2, 1)
    assert sim.pick().task.id == 2
    sim.accel.scratchpad.reserve(1, 1)
    assert sim.pick().task.id == 1


def test_idle_decision_and_switch_to_self():
    t = make_task(1, 1, 10**6, 10_000)
    sim = Simulator(TaskSet([t]), SimConfig(horizon=10**6))
    sim._decide()
    assert sim.phase == "idle" and sim.holder is None
    sim.jobs[1] = Tcb(t, 0, t.deadline, t.c_lo, ModeState.LO_MODE)
    sim._decide()
    assert sim.holder is sim.jobs[1] and sim.phase == "run"
    saves = list(sim.metrics.save_cycles)
    sim._decide()
    assert sim.phase == "run" and sim.metrics.save_cycles == saves


# -- modes and overruns ---------------------------------------------------------

def test_overrun_walks_the_mode_machine():
    t = make_task(1, 1, 100_000, 10_000, HI, c_hi=20_000)
    sim = Simulator(TaskSet([t]), SimConfig(horizon=100_000, overrun_prob=1.0, record_events=True))
    m = sim.run()
    # idle decisions wait for the first tick
    at = sim.clock.advance(SYS.t_sr, 10_000)
    done = sim.clock.advance(SYS.t_sr, 20_000)
    assert m.mode_transitions == [
        (at, "LoMode", "Transition"),
        (at, "Transition", "HiMode"),
        (done, "HiMode", "LoMode"),
    ]
    # demand equals c_hi when the overrun scale matches the criticality factor
    assert _events(sim, "complete", 1)[0][3] == done
    assert m.mode_switches == 1


def test_no_overrun_means_no_mode_switch():
    g = generate(GenParams(n_tasks=6, total_util=0.6, seed=3, c_lo_range=(50_000, 500_000)))
    m = run(g, SimConfig(overrun_prob=0.0, max_releases=500))
    assert m.mode_switches == 0
    assert m.lo_released_in_hi == 0 and m.survivability is None


def _overrun_mix():
    hi = make_task(1, 1, 100_000, 10_000, HI, c_hi=40_000)
    lo = make_task(2, 2, 30_000, 5_000, LO)
    return TaskSet([hi, lo])


def test_amc_drops_lo_jobs_and_mesc_keeps_them():
    amc = run(_overrun_mix(), SimConfig(horizon=600_000, overrun_prob=1.0, overrun_scale=4.0, policy="amc"))
    mesc = run(_overrun_mix(), SimConfig(horizon=600_000, overrun_prob=1.0, overrun_scale=4.0, policy="mesc"))
    assert amc.dropped["LO"] > 0
    assert mesc.dropped["LO"] == 0
    assert mesc.lo_released_in_hi > 0
    assert mesc.lo_completed_in_hi >= amc.lo_completed_in_hi
    assert amc.missed["HI"] == mesc.missed["HI"] == 0


def test_overrun_injection_is_seeded():
    g = generate(GenParams(n_tasks=8, total_util=0.6, seed=1, c_lo_range=(50_000, 500_000)))
    cfg = SimConfig(overrun_prob=0.5, seed=9, max_releases=800)
    assert run(g, cfg).to_json() == run(g, cfg).to_json()


def test_transitions_are_legal_and_conserve_jobs():
    for seed in range(6):
        g = generate(GenParams(n_tasks=10, total_util=0.75, seed=seed, acc_proportion=0.8,
                               c_lo_range=(50_000, 1_000_000)))
        m = run(g, SimConfig(overrun_prob=0.5, seed=seed, max_releases=800))
        for _, a, b in m.mode_transitions:
            assert (ModeState(a), ModeState(b)) in LEGAL_TRANSITIONS
        for lvl in ("LO", "HI"):
            assert m.released[lvl] == m.completed[lvl] + m.missed[lvl] + m.dropped[lvl] + m.in_flight[lvl]


def test_deadline_miss_is_aborted():
    a = make_task(1, 1, 20_000, 15_000)
    b = make_task(2, 2, 20_000, 15_000)
    m = run(TaskSet([a, b]), SimConfig(horizon=100_000))
    assert m.missed["LO"] > 0
    assert not m.success


def _loaded_pair():
    rng = np.random.default_rng(0)
    tasks = []
    for tid, period, c in ((1, 150_001, 30_000), (2, 1_000_000, 200_000)):
        base = make_task(tid, tid, period, c)
        tasks.append(replace(base, trace=make_trace(c, 20_000, rng)))
    return TaskSet(tasks)


def test_bank_model_off_forces_eviction():
    on = run(_loaded_pair(), SimConfig(horizon=200_000))
    off = run(_loaded_pair(), SimConfig(horizon=200_000, bank_model=False))
    assert len(on.save_cycles) == 1
    assert sum(off.save_cycles) == sum(on.save_cycles) + acc.bank_move_cycles(SYS)
    assert sum(off.restore_cycles) == sum(on.restore_cycles) + acc.bank_move_cycles(SYS)


# -- sweeps ----------------------------------------------------------------------

def _random_set(seed, util=0.7):
    return generate(GenParams(n_tasks=8, total_util=util, seed=seed, acc_proportion=0.75,
                              c_lo_range=(50_000, 1_000_000)))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), overrun=st.sampled_from([0.0, 0.3]))
def test_inversions_bounded_at_instruction_level(seed, overrun):
    g = _random_set(seed)
    m = run(g, SimConfig(overrun_prob=overrun, seed=seed, max_releases=600))
    longest = max((t.max_instr_cycles for t in g if t.uses_accelerator), default=0)
    sw = max(m.save_cycles, default=0) + max(m.restore_cycles, default=0)
    # a switch already under way, the tick wait, one instruction, our own switch
    work = 2 * sw + SYS.t_sr + longest
    bound = work + (work // SYS.t_sr + 2) * SYS.y_cpu_check
    for x in m.pi_inversions + m.ci_inversions:
        assert 0 < x <= bound


def test_non_preemptive_inverts_longer():
    for seed in range(4):
        g = _random_set(seed, 0.6)
        instr = summarize(run(g, SimConfig(seed=seed, max_releases=600)))
        none = summarize(run(g, SimConfig(seed=seed, max_releases=600, preemption_mode="none")))
        assert none["mean_pi"] >= instr["mean_pi"]


def test_limited_sits_between():
    g = _random_set(11, 0.6)
    res = {mode: summarize(run(g, SimConfig(max_releases=600, preemption_mode=mode)))["mean_pi"]
           for mode in ("instr", "limited", "none")}
    assert res["instr"] <= res["limited"] <= res["none"]


def test_metrics_round_trip_through_json():
    m = run(_pair(), SimConfig(horizon=200_000))
    d = m.to_dict()
    assert d["success"] and d["released"]["LO"] == 3
    assert isinstance(SimMetrics().to_json(), str)


def test_events_csv_header():
    sim = Simulator(_pair(), SimConfig(horizon=200_000, record_events=True))
    sim.run()
    lines = sim.events_csv().splitlines()
    assert lines[0] == "timestamp,event,task_id,duration"
    assert len(lines) == len(sim.events) + 1
    assert np.all(np.diff([e[0] for e in sim.events]) >= 0)
