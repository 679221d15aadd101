"""Offline scratchpad allocation: how many banks each task gets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .task_model import SystemParams


@dataclass(frozen=True)
class ProfilePoint:
    banks: int
    exec_cycles: int


def min_banks_static(footprint_bytes: int, sys: SystemParams, uses_accelerator: bool = True) -> int:
    """Banks needed to hold the footprint, at least one, at most all of them."""
    if footprint_bytes < 0:
        raise ValueError("footprint must be non-negative")
    if not uses_accelerator:
        return 0
    need = -(-footprint_bytes // sys.bank_size)
    return min(max(need, 1), sys.total_banks)


def min_banks_profiled(profile: Sequence[ProfilePoint], threshold_eps: float = 0.01) -> int:
    """Smallest bank count whose measured time is within ``eps`` of the best."""
    if not profile:
        raise ValueError("empty profile")
    if threshold_eps < 0:
        raise ValueError("threshold_eps must be non-negative")
    points = sorted(profile, key=lambda p: p.banks)
    best = min(p.exec_cycles for p in points)
    limit = (1.0 + threshold_eps) * best
    for p in points:
        if p.exec_cycles <= limit:
            return p.banks
    raise AssertionError("unreachable: the minimum always satisfies the threshold")


def read_profile_csv(path: str | Path) -> list[ProfilePoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(row for row in fh if not row.startswith("#"))]
    return [ProfilePoint(int(r["banks"]), int(float(r["exec_cycles"]))) for r in rows]
