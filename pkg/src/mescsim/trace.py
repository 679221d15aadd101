"""Accelerator instruction traces and the per-instruction cost profile.

Traces are synthetic stand-ins for compiled DNN workloads.  They are stored
column-wise in numpy arrays because large workloads run to tens of thousands
of instructions per task.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, Optional

import numpy as np


class InstructionKind(IntEnum):
    CONFIG = 0
    LOAD = 1
    STORE = 2
    PRELOAD = 3
    COMPUTE = 4
    FLUSH = 5


class ConfigClass(IntEnum):
    LOAD_CFG = 0
    STORE_CFG = 1
    EXEC_CFG = 2
    NORM_CFG = 3


NO_CONFIG = -1


@dataclass(frozen=True)
class CostProfile:
    """Cycle costs of accelerator instructions and context-switch primitives.

    DMA moves are charged ``dma_setup + dma_beat_cycles * ceil(bytes / 64)``:
    one 64-byte transfer per beat over a 128-bit bus takes 4 cycles.
    """

    config_cycles: int = 2
    dma_setup: int = 100
    dma_beat_bytes: int = 64
    dma_beat_cycles: int = 4
    compute_min: int = 500
    compute_max: int = 10_000
    max_instr_bound: int = 10_000
    load_chunk_bytes: int = 16_384
    store_bytes: int = 4_096
    block_pairs: int = 32  # preload/compute pairs between store + exec-config
    config_slot_bytes: int = 16
    flush_cycles: int = 20
    redispatch_cycles: int = 10
    queue_depth: int = 16
    operators_per_trace: int = 10

    def dma_cycles(self, nbytes: int) -> int:
        if nbytes <= 0:
            return 0
        beats = -(-nbytes // self.dma_beat_bytes)
        return self.dma_setup + self.dma_beat_cycles * beats

    def validate(self) -> None:
        if self.config_cycles < 1 or self.compute_min < 1:
            raise ValueError("instruction costs must be positive")
        if self.compute_min > self.compute_max:
            raise ValueError("compute_min exceeds compute_max")
        if self.max_instr_bound < max(self.config_cycles, self.compute_max):
            raise ValueError(
                f"max_instr_bound={self.max_instr_bound} is below the cheapest "
                "feasible instruction mix"
            )
        if self.dma_cycles(self.load_chunk_bytes) > self.max_instr_bound:
            raise ValueError("load_chunk_bytes produces loads above max_instr_bound")
        if self.dma_cycles(self.store_bytes) > self.max_instr_bound:
            raise ValueError("store_bytes produces stores above max_instr_bound")


DEFAULT_PROFILE = CostProfile()


@dataclass(frozen=True)
class Instruction:
    kind: InstructionKind
    cycles: int
    bytes_touched: int = 0
    config_class: Optional[ConfigClass] = None

    def __post_init__(self):
        if self.cycles <= 0:
            raise ValueError("instruction cycles must be positive")
        if self.kind == InstructionKind.CONFIG:
            if self.config_class is None:
                raise ValueError("config instruction needs a config_class")
            if self.cycles != DEFAULT_PROFILE.config_cycles:
                raise ValueError("config instructions execute in 2 cycles")
        elif self.config_class is not None:
            raise ValueError("only config instructions carry a config_class")
        if self.bytes_touched and self.kind not in (InstructionKind.LOAD, InstructionKind.STORE):
            raise ValueError("only load/store instructions touch bytes")


class InstructionTrace:
    """Ordered accelerator instructions with cached prefix sums."""

    __slots__ = ("kinds", "cycles", "nbytes", "config_class", "ends", "_load_ends", "_load_prefix",
                 "_first_cfg_end")

    def __init__(self, kinds, cycles, nbytes=None, config_class=None):
        self.kinds = np.asarray(kinds, dtype=np.int8)
        self.cycles = np.asarray(cycles, dtype=np.int64)
        n = len(self.cycles)
        self.nbytes = np.zeros(n, dtype=np.int64) if nbytes is None else np.asarray(nbytes, dtype=np.int64)
        if config_class is None:
            self.config_class = np.full(n, NO_CONFIG, dtype=np.int8)
        else:
            self.config_class = np.asarray(config_class, dtype=np.int8)
        if n == 0:
            raise ValueError("empty trace")
        if not (len(self.kinds) == len(self.nbytes) == len(self.config_class) == n):
            raise ValueError("trace columns differ in length")
        if (self.cycles <= 0).any():
            raise ValueError("instruction cycles must be positive")
        self.ends = np.cumsum(self.cycles)
        loads = self.kinds == InstructionKind.LOAD
        self._load_ends = self.ends[loads]
        self._load_prefix = np.cumsum(self.nbytes[loads])
        first = {}
        for cls in ConfigClass:
            idx = np.flatnonzero(self.config_class == cls)
            if len(idx):
                first[cls] = int(self.ends[idx[0]])
        self._first_cfg_end = first

    @classmethod
    def from_instructions(cls, instructions) -> "InstructionTrace":
        instructions = list(instructions)
        return cls(
            [i.kind for i in instructions],
            [i.cycles for i in instructions],
            [i.bytes_touched for i in instructions],
            [NO_CONFIG if i.config_class is None else i.config_class for i in instructions],
        )

    @classmethod
    def from_cycles(cls, cycles) -> "InstructionTrace":
        """Compute-only trace, handy for hand-built examples."""
        return cls([InstructionKind.COMPUTE] * len(cycles), cycles)

    @property
    def total_cycles(self) -> int:
        return int(self.ends[-1])

    @property
    def max_cycles(self) -> int:
        return int(self.cycles.max())

    @property
    def footprint_bytes(self) -> int:
        return int(self._load_prefix[-1]) if len(self._load_prefix) else 0

    def __len__(self):
        return len(self.cycles)

    def __getitem__(self, i) -> Instruction:
        cfg = int(self.config_class[i])
        return Instruction(
            InstructionKind(int(self.kinds[i])),
            int(self.cycles[i]),
            int(self.nbytes[i]),
            None if cfg == NO_CONFIG else ConfigClass(cfg),
        )

    def __iter__(self) -> Iterator[Instruction]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, InstructionTrace):
            return NotImplemented
        return (
            np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.cycles, other.cycles)
            and np.array_equal(self.nbytes, other.nbytes)
            and np.array_equal(self.config_class, other.config_class)
        )

    def __hash__(self):
        return hash((len(self), self.total_cycles, self.max_cycles))

    def __repr__(self):
        return f"InstructionTrace(n={len(self)}, total={self.total_cycles}, max={self.max_cycles})"

    # -- position queries; a position is a count of executed cycles ------

    def inflight_at(self, position: int) -> Optional[tuple[int, int]]:
        """(cycles, done) of the instruction executing at ``position``.

        None when ``position`` sits on an instruction boundary.
        """
        if position <= 0 or position >= self.total_cycles:
            return None
        idx = int(np.searchsorted(self.ends, position, side="left"))
        end = int(self.ends[idx])
        if end == position:
            return None
        cyc = int(self.cycles[idx])
        return cyc, cyc - (end - position)

    def next_boundary(self, position: int) -> int:
        if position <= 0:
            return 0
        if position >= self.total_cycles:
            return self.total_cycles
        return int(self.ends[np.searchsorted(self.ends, position, side="left")])

    def remaining_instructions(self, position: int) -> int:
        return len(self) - int(np.searchsorted(self.ends, position, side="right"))

    def loaded_bytes(self, position: int) -> int:
        """Bytes moved into the scratchpad by loads finished at ``position``."""
        k = int(np.searchsorted(self._load_ends, position, side="right"))
        return int(self._load_prefix[k - 1]) if k else 0

    def config_classes_seen(self, position: int) -> list[ConfigClass]:
        return [c for c, end in self._first_cfg_end.items() if end <= position]

    def operator_boundaries(self, n_ops: int) -> np.ndarray:
        """Instruction boundaries closest above k*total/n_ops, k = 1..n_ops."""
        total = self.total_cycles
        targets = [(k * total) // n_ops for k in range(1, n_ops)]
        idx = np.searchsorted(self.ends, targets, side="left")
        cuts = np.unique(self.ends[idx])
        if cuts[-1] != total:
            cuts = np.append(cuts, total)
        return cuts

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kinds.tolist(),
            "cycles": self.cycles.tolist(),
            "bytes": self.nbytes.tolist(),
            "config_class": self.config_class.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstructionTrace":
        return cls(d["kind"], d["cycles"], d.get("bytes"), d.get("config_class"))


_PROLOGUE = (ConfigClass.LOAD_CFG, ConfigClass.STORE_CFG, ConfigClass.EXEC_CFG, ConfigClass.NORM_CFG)


def make_trace(total_cycles: int, footprint_bytes: int, rng, profile: CostProfile = DEFAULT_PROFILE
               ) -> InstructionTrace:
    """Synthesize a trace whose cycles sum exactly to ``total_cycles``.

    Layout: one config per class, loads covering ``footprint_bytes``, then
    repeated blocks of [exec-config, (preload, compute) * block_pairs, store].
    The last instruction absorbs the remainder of the budget.
    """
    profile.validate()
    if total_cycles < profile.config_cycles:
        raise ValueError(f"total_cycles={total_cycles} is below a single config instruction")
    kinds: list[int] = []
    cycles: list[int] = []
    nbytes: list[int] = []
    cfg: list[int] = []
    budget = int(total_cycles)

    for cls in _PROLOGUE:
        if budget < profile.config_cycles:
            break
        kinds.append(InstructionKind.CONFIG)
        cycles.append(profile.config_cycles)
        nbytes.append(0)
        cfg.append(cls)
        budget -= profile.config_cycles

    left = int(footprint_bytes)
    while left > 0:
        chunk = min(left, profile.load_chunk_bytes)
        cost = profile.dma_cycles(chunk)
        if cost > budget:
            raise ValueError(
                f"budget of {total_cycles} cycles cannot stage {footprint_bytes} bytes"
            )
        kinds.append(InstructionKind.LOAD)
        cycles.append(cost)
        nbytes.append(chunk)
        cfg.append(NO_CONFIG)
        budget -= cost
        left -= chunk

    if budget > 0:
        block = 2 * profile.block_pairs + 2
        # sized with the cheapest compute so the tiled body always covers the budget
        n_blocks = budget // (profile.compute_min * 2 * profile.block_pairs) + 1
        pattern = np.full(block, InstructionKind.COMPUTE, dtype=np.int8)
        pattern[0] = InstructionKind.CONFIG
        pattern[1:-1:2] = InstructionKind.PRELOAD
        pattern[-1] = InstructionKind.STORE
        body_kinds = np.tile(pattern, n_blocks)
        body_cycles = rng.integers(profile.compute_min, profile.compute_max + 1, size=len(body_kinds))
        body_cycles[body_kinds == InstructionKind.CONFIG] = profile.config_cycles
        store_cost = profile.dma_cycles(profile.store_bytes)
        body_cycles[body_kinds == InstructionKind.STORE] = store_cost
        csum = np.cumsum(body_cycles)
        k = int(np.searchsorted(csum, budget, side="right"))
        used = int(csum[k - 1]) if k else 0
        body_kinds = body_kinds[:k]
        body_cycles = body_cycles[:k]
        rem = budget - used
        if rem > 0:
            body_kinds = np.append(body_kinds, InstructionKind.COMPUTE)
            body_cycles = np.append(body_cycles, rem)
        body_bytes = np.where(body_kinds == InstructionKind.STORE, profile.store_bytes, 0)
        body_cfg = np.where(body_kinds == InstructionKind.CONFIG, ConfigClass.EXEC_CFG, NO_CONFIG)
        kinds_a = np.concatenate([np.asarray(kinds, dtype=np.int8), body_kinds.astype(np.int8)])
        cycles_a = np.concatenate([np.asarray(cycles, dtype=np.int64), body_cycles.astype(np.int64)])
        bytes_a = np.concatenate([np.asarray(nbytes, dtype=np.int64), body_bytes.astype(np.int64)])
        cfg_a = np.concatenate([np.asarray(cfg, dtype=np.int8), body_cfg.astype(np.int8)])
        return InstructionTrace(kinds_a, cycles_a, bytes_a, cfg_a)
    return InstructionTrace(kinds, cycles, nbytes, cfg)
