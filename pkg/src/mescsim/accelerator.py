"""Behavioral cost model of the preemptible accelerator.

Covers the scratchpad banks and their locks, the address remapper, the
config-copy buffer, and the cycle cost of saving and restoring an
accelerator context.  The simulator owns one ``AcceleratorState`` per run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .task_model import SystemParams
from .trace import DEFAULT_PROFILE, ConfigClass, CostProfile, Instruction, InstructionKind, InstructionTrace


class AcceleratorError(Exception):
    pass


class AllocationExceeded(AcceleratorError):
    pass


class CapacityExceeded(AcceleratorError):
    pass


class TranslationFault(AcceleratorError):
    pass


class ConfigCopyBuffer:
    """Latest configuration instruction of each class."""

    def __init__(self):
        self.slots: dict[ConfigClass, Instruction] = {}

    def record(self, instr: Instruction) -> None:
        if instr.kind != InstructionKind.CONFIG:
            return
        self.slots[instr.config_class] = instr

    def replay(self) -> list[Instruction]:
        return [self.slots[c] for c in ConfigClass if c in self.slots]

    def classes(self) -> set[ConfigClass]:
        return set(self.slots)

    def __len__(self):
        return len(self.slots)

    @classmethod
    def from_trace_prefix(cls, trace: InstructionTrace, position: int) -> "ConfigCopyBuffer":
        buf = cls()
        for c in trace.config_classes_seen(position):
            buf.record(Instruction(InstructionKind.CONFIG, 2, config_class=c))
        return buf


@dataclass(frozen=True)
class Mapping:
    task_id: int
    orig_start: int
    length: int
    bank: int
    offset: int

    @property
    def orig_end(self) -> int:
        return self.orig_start + self.length


class RemappingBlock:
    """Per-task table translating original addresses to (bank, offset)."""

    entry_bytes = 16

    def __init__(self, capacity_bytes: int = 4096):
        self.capacity_bytes = capacity_bytes
        self.entries: dict[int, list[Mapping]] = {}

    @property
    def capacity_entries(self) -> int:
        return self.capacity_bytes // self.entry_bytes

    def count(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def room_for(self, new_entries: int) -> bool:
        return self.count() + new_entries <= self.capacity_entries

    def add(self, m: Mapping) -> None:
        lst = self.entries.setdefault(m.task_id, [])
        if lst:
            last = lst[-1]
            # contiguous in both address spaces: extend the previous record
            if last.bank == m.bank and last.orig_end == m.orig_start and last.offset + last.length == m.offset:
                lst[-1] = Mapping(m.task_id, last.orig_start, last.length + m.length, m.bank, last.offset)
                return
        if not self.room_for(1):
            raise CapacityExceeded(f"remapping block full ({self.capacity_entries} entries)")
        lst.append(m)

    def would_merge(self, task_id: int, orig: int, bank: int, offset: int) -> bool:
        lst = self.entries.get(task_id)
        if not lst:
            return False
        last = lst[-1]
        return last.bank == bank and last.orig_end == orig and last.offset + last.length == offset

    def lookup(self, task_id: int, addr: int) -> tuple[int, int]:
        for m in self.entries.get(task_id, ()):
            if m.orig_start <= addr < m.orig_end:
                return m.bank, m.offset + (addr - m.orig_start)
        raise TranslationFault(f"task {task_id} has no mapping for address {addr:#x}")

    def drop(self, task_id: int) -> None:
        self.entries.pop(task_id, None)


@dataclass
class Bank:
    locked_by: Optional[int] = None
    bytes_valid: int = 0


class ScratchpadState:
    """Banks with banklocks, per-task reservations and the remapper."""

    def __init__(self, total_banks: int = 8, bank_size: int = 32768, remap_capacity: int = 4096):
        self.bank_size = bank_size
        self.banks = [Bank() for _ in range(total_banks)]
        self.remap = RemappingBlock(remap_capacity)
        self.reserved: dict[int, int] = {}
        self.placed_bytes: dict[int, int] = {}
        self.lock_counts: dict[int, int] = {}

    @classmethod
    def for_system(cls, sys: SystemParams) -> "ScratchpadState":
        return cls(sys.total_banks, sys.bank_size, sys.remap_block_size)

    @property
    def total_banks(self) -> int:
        return len(self.banks)

    def locked_banks(self, task_id: int) -> list[int]:
        return [i for i, b in enumerate(self.banks) if b.locked_by == task_id]

    def locked_count(self, task_id: int) -> int:
        return self.lock_counts.get(task_id, 0)

    def committed(self, task_id: int) -> int:
        return max(self.reserved.get(task_id, 0), self.lock_counts.get(task_id, 0))

    def residents(self) -> set[int]:
        return set(self.lock_counts) | {t for t, n in self.reserved.items() if n > 0}

    def free_banks(self) -> int:
        return self.total_banks - sum(self.committed(t) for t in self.residents())

    def lock(self, bank: int, task_id: int) -> None:
        b = self.banks[bank]
        if b.locked_by == task_id:
            return
        if b.locked_by is not None:
            raise AllocationExceeded(f"bank {bank} is locked by task {b.locked_by}")
        b.locked_by = task_id
        self.lock_counts[task_id] = self.lock_counts.get(task_id, 0) + 1

    def reserve(self, task_id: int, eta: int) -> None:
        if eta > self.total_banks:
            raise AllocationExceeded(f"task {task_id} wants {eta} of {self.total_banks} banks")
        extra = eta - self.committed(task_id)
        if extra > self.free_banks():
            raise AllocationExceeded(f"not enough free banks to reserve {eta} for task {task_id}")
        self.reserved[task_id] = max(eta, self.reserved.get(task_id, 0))

    def check(self, etas: Optional[dict[int, int]] = None) -> None:
        """Raise AssertionError if any bank invariant is broken."""
        total = sum(self.committed(t) for t in self.residents())
        assert total <= self.total_banks, "banks over-committed"
        counts: dict[int, int] = {}
        for b in self.banks:
            if b.locked_by is not None:
                counts[b.locked_by] = counts.get(b.locked_by, 0) + 1
        assert counts == self.lock_counts, "lock bookkeeping out of sync with the banks"
        for b in self.banks:
            assert 0 <= b.bytes_valid <= self.bank_size, "bytes_valid out of range"
            assert b.locked_by is not None or b.bytes_valid == 0, "unlocked bank holds data"
        if etas:
            for t in self.residents():
                assert self.locked_count(t) <= etas.get(t, 0), f"task {t} exceeds its bank allocation"
        for t, lst in self.remap.entries.items():
            for m in lst:
                assert self.banks[m.bank].locked_by == t, "mapping into a bank the task does not hold"


def remap_write(state: ScratchpadState, task, original_addr: int, nbytes: int) -> list[tuple[int, int, int]]:
    """Place ``nbytes`` of ``task``'s data; returns (bank, offset, length) pieces.

    Fills banks the task already holds before locking fresh ones.  Nothing
    is changed if the write cannot be placed in full.
    """
    if nbytes <= 0:
        raise ValueError("write size must be positive")
    tid, eta = task.id, task.banks
    plan: list[tuple[int, int, int]] = []
    left = nbytes
    held = state.locked_banks(tid)
    for i in held:
        room = state.bank_size - state.banks[i].bytes_valid
        if room > 0 and left > 0:
            n = min(room, left)
            plan.append((i, state.banks[i].bytes_valid, n))
            left -= n
    n_locked = len(held)
    others = sum(state.committed(t) for t in state.residents() if t != tid)
    for i, b in enumerate(state.banks):
        if left <= 0:
            break
        if b.locked_by is not None:
            continue
        if n_locked + 1 > eta:
            raise AllocationExceeded(f"task {tid} would exceed its {eta}-bank allocation")
        if others + max(n_locked + 1, state.reserved.get(tid, 0)) > state.total_banks:
            raise AllocationExceeded(f"bank {i} is reserved by another task")
        n = min(state.bank_size, left)
        plan.append((i, 0, n))
        n_locked += 1
        left -= n
    if left > 0:
        raise AllocationExceeded(f"task {tid} has no free bank for {left} more bytes")

    # pieces land in distinct banks, so only the first can extend an existing entry
    new_entries = len(plan) - int(state.remap.would_merge(tid, original_addr, plan[0][0], plan[0][1]))
    if not state.remap.room_for(new_entries):
        raise CapacityExceeded("remapping block full")

    addr = original_addr
    for bank, off, n in plan:
        b = state.banks[bank]
        state.lock(bank, tid)
        b.bytes_valid = off + n
        state.remap.add(Mapping(tid, addr, n, bank, off))
        addr += n
    state.placed_bytes[tid] = state.placed_bytes.get(tid, 0) + nbytes
    return plan


def remap_read(state: ScratchpadState, task_id: int, original_addr: int) -> tuple[int, int]:
    return state.remap.lookup(task_id, original_addr)


def release_banks(state: ScratchpadState, task_id: int) -> int:
    freed = 0
    for b in state.banks:
        if b.locked_by == task_id:
            b.locked_by = None
            b.bytes_valid = 0
            freed += 1
    state.remap.drop(task_id)
    state.reserved.pop(task_id, None)
    state.lock_counts.pop(task_id, None)
    state.placed_bytes.pop(task_id, None)
    return freed


def sync_loads(state: ScratchpadState, task, loaded_bytes: int) -> None:
    """Bring the scratchpad up to date with the loads a job has finished."""
    have = state.placed_bytes.get(task.id, 0)
    if loaded_bytes > have:
        remap_write(state, task, have, loaded_bytes - have)


# -- cycle costs ---------------------------------------------------------


def bank_move_cycles(sys: SystemParams, profile: CostProfile = DEFAULT_PROFILE) -> int:
    """Step-wise DMA of one full bank between scratchpad and DRAM."""
    return profile.dma_cycles(sys.bank_size)


def fixed_save_cycles(sys: SystemParams, profile: CostProfile = DEFAULT_PROFILE) -> int:
    # queue flush, accumulator mvout, config buffer mvout, remap table mvout, TLB flush
    return (
        profile.flush_cycles
        + profile.dma_cycles(sys.accumulator_size)
        + profile.dma_cycles(len(ConfigClass) * profile.config_slot_bytes)
        + profile.dma_cycles(sys.remap_block_size)
        + profile.flush_cycles
    )


def fixed_restore_cycles(sys: SystemParams, profile: CostProfile = DEFAULT_PROFILE) -> int:
    # config buffer mvin, remap table update, accumulator mvin, config replay
    return (
        profile.dma_cycles(len(ConfigClass) * profile.config_slot_bytes)
        + profile.dma_cycles(sys.remap_block_size)
        + profile.dma_cycles(sys.accumulator_size)
        + len(ConfigClass) * profile.config_cycles
    )


def redispatch_cycles(remaining_instructions: int, profile: CostProfile = DEFAULT_PROFILE) -> int:
    return profile.redispatch_cycles * min(profile.queue_depth, max(remaining_instructions, 0))


def worst_case_overheads(sys: SystemParams, profile: CostProfile = DEFAULT_PROFILE) -> tuple[int, int]:
    """Largest (save, restore) cycles one accelerator switch can cost.

    Both include the CPU context switch and moving every bank.
    """
    per_bank = bank_move_cycles(sys, profile)
    save = sys.y_cpu_switch + fixed_save_cycles(sys, profile) + sys.total_banks * per_bank
    restore = (sys.y_cpu_switch + fixed_restore_cycles(sys, profile) + sys.total_banks * per_bank
               + profile.redispatch_cycles * profile.queue_depth)
    return save, restore


def calibrated_system_params(profile: CostProfile = DEFAULT_PROFILE, **overrides) -> SystemParams:
    """SystemParams whose save/restore overheads bound the cost model."""
    base = SystemParams(**{k: v for k, v in overrides.items() if k not in ("y_acc_save", "y_acc_restore")})
    save, restore = worst_case_overheads(base, profile)
    d = base.to_dict()
    d["y_acc_save"] = overrides.get("y_acc_save", save)
    d["y_acc_restore"] = overrides.get("y_acc_restore", restore)
    return SystemParams(**d)


# -- context switching -----------------------------------------------------


@dataclass
class SavedContext:
    config: ConfigCopyBuffer
    evicted_banks: int = 0
    evicted_bytes: int = 0


@dataclass
class AcceleratorState:
    """Scratchpad plus the accelerator context currently loaded, if any."""

    scratchpad: ScratchpadState
    profile: CostProfile = DEFAULT_PROFILE
    live: Optional[int] = None
    frozen: bool = False
    config: ConfigCopyBuffer = field(default_factory=ConfigCopyBuffer)
    saved: dict[int, SavedContext] = field(default_factory=dict)

    @classmethod
    def for_system(cls, sys: SystemParams, profile: CostProfile = DEFAULT_PROFILE) -> "AcceleratorState":
        return cls(ScratchpadState.for_system(sys), profile)


def needs_eviction(state: ScratchpadState, task_id: int, next_task, force: bool = False) -> bool:
    """Whether ``task_id``'s banks must leave to make room for ``next_task``."""
    if force:
        return True
    if next_task is None or not next_task.uses_accelerator:
        return False
    need = next_task.banks - state.committed(next_task.id)
    return need > state.free_banks()


def save_cost(state: AcceleratorState, task, next_task, sys: SystemParams, force_evict: bool = False
              ) -> tuple[int, int]:
    """(cycles, evicted_banks) of saving ``task``'s accelerator context."""
    sp = state.scratchpad
    evict = needs_eviction(sp, task.id, next_task, force_evict)
    n = sp.locked_count(task.id) if evict else 0
    return fixed_save_cycles(sys, state.profile) + n * bank_move_cycles(sys, state.profile), n


def context_save(state: AcceleratorState, task, next_task, sys: SystemParams, config: ConfigCopyBuffer,
                 force_evict: bool = False) -> tuple[int, int]:
    cycles, evicted = save_cost(state, task, next_task, sys, force_evict)
    ctx = SavedContext(config)
    if evicted or force_evict:
        ctx.evicted_banks = evicted
        ctx.evicted_bytes = state.scratchpad.placed_bytes.get(task.id, 0)
        release_banks(state.scratchpad, task.id)
    state.saved[task.id] = ctx
    if state.live == task.id:
        state.live = None
        state.frozen = False
    return cycles, evicted


def evict_resident(state: AcceleratorState, task_id: int, sys: SystemParams) -> int:
    """Move a descheduled task's banks to DRAM; returns cycles."""
    sp = state.scratchpad
    n = sp.locked_count(task_id)
    nbytes = sp.placed_bytes.get(task_id, 0)
    release_banks(sp, task_id)
    ctx = state.saved.get(task_id)
    if ctx is None:
        ctx = state.saved[task_id] = SavedContext(ConfigCopyBuffer())
    ctx.evicted_banks += n
    ctx.evicted_bytes = max(ctx.evicted_bytes, nbytes)
    return n * bank_move_cycles(sys, state.profile)


def restore_cost(state: AcceleratorState, task, sys: SystemParams, remaining_instructions: int = 0) -> int:
    ctx = state.saved.get(task.id)
    reload = ctx.evicted_banks if ctx else 0
    return (fixed_restore_cycles(sys, state.profile) + reload * bank_move_cycles(sys, state.profile)
            + redispatch_cycles(remaining_instructions, state.profile))


def context_restore(state: AcceleratorState, task, sys: SystemParams, remaining_instructions: int = 0) -> int:
    cycles = restore_cost(state, task, sys, remaining_instructions)
    ctx = state.saved.pop(task.id, None)
    sp = state.scratchpad
    sp.reserve(task.id, task.banks)
    if ctx is not None:
        if ctx.evicted_bytes > 0:
            remap_write(sp, task, 0, ctx.evicted_bytes)
        state.config = ConfigCopyBuffer()
        for instr in ctx.config.replay():
            state.config.record(instr)
    state.live = task.id
    state.frozen = False
    return cycles


def freeze_and_drain(inflight: Optional[tuple[int, int]]) -> int:
    """Cycles until the in-flight instruction commits; 0 when idle."""
    if inflight is None:
        return 0
    cycles, done = inflight
    if not 0 <= done <= cycles:
        raise ValueError("progress outside instruction bounds")
    return cycles - done
