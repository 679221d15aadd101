import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mescsim.trace import (
    DEFAULT_PROFILE,
    ConfigClass,
    CostProfile,
    Instruction,
    InstructionKind,
    InstructionTrace,
    make_trace,
)


def test_two_cycle_budget_is_one_config():
    tr = make_trace(2, 0, np.random.default_rng(0))
    assert len(tr) == 1
    assert tr[0].kind == InstructionKind.CONFIG
    assert tr[0].cycles == 2


def test_cycles_sum_to_budget():
    tr = make_trace(10**6, 16_384, np.random.default_rng(0))
    assert tr.total_cycles == 10**6
    assert int(tr.cycles.sum()) == 10**6


def test_default_profile_keeps_instructions_short():
    tr = make_trace(10**7, 65_536, np.random.default_rng(7))
    assert tr.max_cycles <= 10**4
    # two orders of magnitude below the workload itself
    assert tr.total_cycles / tr.max_cycles >= 100


def test_loads_cover_footprint():
    tr = make_trace(500_000, 50_000, np.random.default_rng(3))
    loads = tr.nbytes[tr.kinds == InstructionKind.LOAD]
    assert loads.sum() == 50_000
    assert tr.footprint_bytes == 50_000


def test_budget_too_small_for_footprint():
    with pytest.raises(ValueError):
        make_trace(300, 1 << 20, np.random.default_rng(0))


def test_profile_bound_below_compute_is_rejected():
    bad = CostProfile(max_instr_bound=100)
    with pytest.raises(ValueError):
        make_trace(10_000, 0, np.random.default_rng(0), bad)


def test_prologue_seeds_every_config_class():
    tr = make_trace(100_000, 4096, np.random.default_rng(0))
    assert set(tr.config_classes_seen(8)) == set(ConfigClass)
    assert tr.config_classes_seen(0) == []


def test_config_instruction_must_take_two_cycles():
    with pytest.raises(ValueError):
        Instruction(InstructionKind.CONFIG, 3, config_class=ConfigClass.LOAD_CFG)
    with pytest.raises(ValueError):
        Instruction(InstructionKind.COMPUTE, 5, config_class=ConfigClass.LOAD_CFG)
    with pytest.raises(ValueError):
        Instruction(InstructionKind.COMPUTE, 5, bytes_touched=64)


def test_dma_cost():
    p = DEFAULT_PROFILE
    assert p.dma_cycles(0) == 0
    assert p.dma_cycles(64) == 104
    assert p.dma_cycles(65) == 108
    assert p.dma_cycles(32_768) == 2148


def test_position_queries():
    tr = InstructionTrace.from_cycles([100, 1000, 50])
    assert tr.inflight_at(0) is None
    assert tr.inflight_at(100) is None
    assert tr.inflight_at(500) == (1000, 400)
    assert tr.next_boundary(500) == 1100
    assert tr.next_boundary(1100) == 1100
    assert tr.remaining_instructions(0) == 3
    assert tr.remaining_instructions(500) == 2
    assert tr.remaining_instructions(1100) == 1


def test_operator_boundaries_end_at_total():
    tr = make_trace(2_000_000, 8192, np.random.default_rng(1))
    cuts = tr.operator_boundaries(10)
    assert cuts[-1] == tr.total_cycles
    assert len(cuts) == 10
    assert np.all(np.diff(cuts) > 0)
    assert set(cuts.tolist()) <= set(tr.ends.tolist())


def test_round_trip():
    tr = make_trace(123_457, 10_000, np.random.default_rng(5))
    again = InstructionTrace.from_dict(tr.to_dict())
    assert again == tr
    assert list(again) == list(tr)


@settings(max_examples=60, deadline=None)
@given(total=st.integers(2, 3_000_000), footprint=st.integers(0, 40_000), seed=st.integers(0, 2**32))
def test_trace_invariants(total, footprint, seed):
    try:
        tr = make_trace(total, footprint, np.random.default_rng(seed))
    except ValueError:
        # only legitimate when the prologue plus the loads cannot fit
        chunk = DEFAULT_PROFILE.load_chunk_bytes
        full, part = divmod(footprint, chunk)
        loads = full * DEFAULT_PROFILE.dma_cycles(chunk) + DEFAULT_PROFILE.dma_cycles(part)
        assert 8 + loads > total
        return
    assert tr.total_cycles == total
    assert tr.max_cycles <= DEFAULT_PROFILE.max_instr_bound
    assert tr.footprint_bytes == footprint
    cfg = tr.kinds == InstructionKind.CONFIG
    assert np.all(tr.cycles[cfg] == 2)
