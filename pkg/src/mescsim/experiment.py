"""Multi-seed sweeps: successful ratio, survivability and blocking statistics."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .analysis import is_schedulable
from .simulator import ModeState, Policy, PreemptionMode, SimConfig, run
from .task_model import SystemParams
from .taskset_gen import GenParams, generate
from .trace import DEFAULT_PROFILE, CostProfile

CSV_SCHEMA = "mescsim-experiment/1"
ROW_FIELDS = [
    "axis", "value", "policy", "preemption", "sets", "success_ratio", "hi_success_ratio", "hi_mode_success_ratio",
    "survivability", "lo_released_in_hi", "mean_pi", "max_pi", "mean_ci", "max_ci",
    "mean_save", "mean_restore", "analysis_schedulable_ratio",
]
FIGURES = {
    "blocking": "preemption",
    "success": "util",
    "gamma": "gamma",
    "beta": "beta",
}


@dataclass
class ExperimentSpec:
    util_grid: list[float] = field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9, 0.95])
    gamma_grid: list[float] = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8])
    beta_grid: list[int] = field(default_factory=lambda: [5, 10, 20])
    sets_per_point: int = 100
    gen: GenParams = field(default_factory=GenParams)
    sim: SimConfig = field(default_factory=SimConfig)
    policies: list[Policy] = field(default_factory=lambda: [Policy.MESC, Policy.AMC])
    preemption_modes: list[PreemptionMode] = field(
        default_factory=lambda: [PreemptionMode.INSTRUCTION, PreemptionMode.LIMITED, PreemptionMode.NON_PREEMPTIVE]
    )
    figures: list[str] = field(default_factory=lambda: list(FIGURES))
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.util_grid or not self.gamma_grid or not self.beta_grid:
            raise ValueError("sweep grids must be non-empty")
        if self.sets_per_point < 1:
            raise ValueError("sets_per_point must be positive")
        self.policies = [Policy(p) for p in self.policies]
        self.preemption_modes = [PreemptionMode(m) for m in self.preemption_modes]
        unknown = set(self.figures) - set(FIGURES)
        if unknown:
            raise ValueError(f"unknown figures: {sorted(unknown)}")


def derive_seed(master: int, *key: int) -> int:
    """Stable 63-bit seed for one (figure, point, set) coordinate."""
    ss = np.random.SeedSequence([master, *key])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass
class PointResult:
    axis: str
    value: float
    policy: str
    preemption: str
    sets: int = 0
    successes: int = 0
    hi_successes: int = 0
    hi_mode_successes: int = 0
    lo_released_in_hi: int = 0
    lo_completed_in_hi: int = 0
    pi: list[int] = field(default_factory=list)
    ci: list[int] = field(default_factory=list)
    save: list[int] = field(default_factory=list)
    restore: list[int] = field(default_factory=list)
    analysis_ok: int = 0

    def row(self) -> dict:
        def mean(xs):
            return round(float(np.mean(xs)), 3) if xs else 0.0

        surv = (self.lo_completed_in_hi / self.lo_released_in_hi) if self.lo_released_in_hi else ""
        return {
            "axis": self.axis,
            "value": self.value,
            "policy": self.policy,
            "preemption": self.preemption,
            "sets": self.sets,
            "success_ratio": round(self.successes / self.sets, 6) if self.sets else 0.0,
            "hi_success_ratio": round(self.hi_successes / self.sets, 6) if self.sets else 0.0,
            "hi_mode_success_ratio": round(self.hi_mode_successes / self.sets, 6) if self.sets else 0.0,
            "survivability": round(surv, 6) if surv != "" else "",
            "lo_released_in_hi": self.lo_released_in_hi,
            "mean_pi": mean(self.pi),
            "max_pi": max(self.pi, default=0),
            "mean_ci": mean(self.ci),
            "max_ci": max(self.ci, default=0),
            "mean_save": mean(self.save),
            "mean_restore": mean(self.restore),
            "analysis_schedulable_ratio": round(self.analysis_ok / self.sets, 6) if self.sets else 0.0,
        }


def hi_mode_success(m) -> bool:
    """No HI job released outside LoMode missed its deadline."""
    return all(m.by_mode.get(mode, {}).get("HI", {}).get("missed", 0) == 0
               for mode in (ModeState.TRANSITION.value, ModeState.HI_MODE.value))


def _one_set(args) -> list[tuple[str, str, dict]]:
    gen, sim, seed, policies, modes, profile = args
    gen = replace(gen, seed=seed)
    gamma = generate(gen, sim.sys, profile)
    sched = is_schedulable(gamma, sim.sys)
    out = []
    for policy in policies:
        for mode in modes:
            cfg = replace(sim, seed=seed, policy=policy, preemption_mode=mode, profile=profile)
            m = run(gamma, cfg)
            out.append((policy.value, mode.value, {
                "success": m.success,
                "hi_success": m.hi_success,
                "hi_mode_success": hi_mode_success(m),
                "lo_released_in_hi": m.lo_released_in_hi,
                "lo_completed_in_hi": m.lo_completed_in_hi,
                "pi": m.pi_inversions,
                "ci": m.ci_inversions,
                "save": m.save_cycles,
                "restore": m.restore_cycles,
                "sched": sched,
            }))
    return out


def evaluate_point(axis: str, value: float, gen: GenParams, sim: SimConfig, seeds: Sequence[int],
                   policies: Iterable[Policy], modes: Iterable[PreemptionMode],
                   profile: CostProfile = DEFAULT_PROFILE, workers: int = 1) -> list[PointResult]:
    policies = list(policies)
    modes = list(modes)
    results = {(p.value, m.value): PointResult(axis, value, p.value, m.value) for p in policies for m in modes}
    jobs = [(gen, sim, s, policies, modes, profile) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(_one_set, jobs))
    else:
        outs = [_one_set(j) for j in jobs]
    # reduce in seed order so the aggregate never depends on scheduling
    for out in outs:
        for pol, mode, r in out:
            pr = results[(pol, mode)]
            pr.sets += 1
            pr.successes += int(r["success"])
            pr.hi_successes += int(r["hi_success"])
            pr.hi_mode_successes += int(r["hi_mode_success"])
            pr.lo_released_in_hi += r["lo_released_in_hi"]
            pr.lo_completed_in_hi += r["lo_completed_in_hi"]
            pr.pi.extend(r["pi"])
            pr.ci.extend(r["ci"])
            pr.save.extend(r["save"])
            pr.restore.extend(r["restore"])
            pr.analysis_ok += int(r["sched"])
    return [results[(p.value, m.value)] for p in policies for m in modes]


def _seeds(spec: ExperimentSpec, fig_idx: int) -> list[int]:
    # every point on an axis reuses the same seeds, so trends compare paired sets
    return [derive_seed(spec.master_seed, fig_idx, k) for k in range(spec.sets_per_point)]


def sweep(spec: ExperimentSpec, figure: str, profile: CostProfile = DEFAULT_PROFILE) -> list[PointResult]:
    fig_idx = list(FIGURES).index(figure)
    rows: list[PointResult] = []
    if figure == "blocking":
        rows += evaluate_point("preemption", spec.gen.total_util, spec.gen, spec.sim, _seeds(spec, fig_idx),
                               [Policy.MESC], spec.preemption_modes, profile, spec.workers)
    elif figure == "success":
        for k, u in enumerate(spec.util_grid):
            gen = replace(spec.gen, total_util=u)
            rows += evaluate_point("util", u, gen, spec.sim, _seeds(spec, fig_idx), spec.policies,
                                   spec.preemption_modes, profile, spec.workers)
    elif figure == "gamma":
        for k, g in enumerate(spec.gamma_grid):
            gen = replace(spec.gen, crit_proportion=g)
            rows += evaluate_point("gamma", g, gen, spec.sim, _seeds(spec, fig_idx), spec.policies,
                                   [PreemptionMode.INSTRUCTION], profile, spec.workers)
    elif figure == "beta":
        for k, b in enumerate(spec.beta_grid):
            gen = replace(spec.gen, n_tasks=b)
            rows += evaluate_point("beta", b, gen, spec.sim, _seeds(spec, fig_idx), spec.policies,
                                   [PreemptionMode.INSTRUCTION], profile, spec.workers)
    else:
        raise ValueError(f"unknown figure {figure!r}")
    return rows


def rows_to_csv(rows: Sequence[PointResult]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={CSV_SCHEMA}\n")
    w = csv.DictWriter(buf, fieldnames=ROW_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def run_experiment(spec: ExperimentSpec, out_dir: Path, plots: bool = False,
                   profile: CostProfile = DEFAULT_PROFILE) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for fig in spec.figures:
        path = out_dir / f"{fig}.csv"
        path.write_text(rows_to_csv(sweep(spec, fig, profile)), encoding="utf-8")
        written[fig] = path
    if plots:
        for fig, path in list(written.items()):
            written[fig + "_svg"] = plot_csv(path, out_dir / f"{fig}.svg")
    return written


def plot_csv(csv_path: Path, svg_path: Path, metric: Optional[str] = None) -> Path:
    """Render one sweep CSV to SVG; output is byte-stable for a given CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_rows(csv_path)
    if not rows:
        raise ValueError(f"{csv_path} has no rows")
    axis = rows[0]["axis"]
    if metric is None:
        metric = "mean_pi" if axis == "preemption" else "success_ratio"
    plt.rcParams["svg.hashsalt"] = "mescsim"
    fig, ax = plt.subplots(figsize=(6, 4))
    if axis == "preemption":
        labels = [r["preemption"] for r in rows]
        ax.bar(labels, [float(r["mean_pi"]) for r in rows], label="pi")
        ax.bar(labels, [float(r["mean_ci"]) for r in rows], label="ci", alpha=0.6)
        ax.set_yscale("log")
        ax.set_ylabel("mean inversion (cycles)")
    else:
        series: dict[tuple[str, str], list[tuple[float, float]]] = {}
        for r in rows:
            if r[metric] == "":
                continue
            series.setdefault((r["policy"], r["preemption"]), []).append((float(r["value"]), float(r[metric])))
        for (pol, mode), pts in sorted(series.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{pol}/{mode}")
        ax.set_xlabel(axis)
        ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(svg_path)


def spec_from_dict(d: dict, sys: Optional[SystemParams] = None, sim: Optional[SimConfig] = None,
                   gen: Optional[GenParams] = None) -> ExperimentSpec:
    known = {"util_grid", "gamma_grid", "beta_grid", "sets_per_point", "policies", "preemption_modes",
             "figures", "master_seed", "workers"}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown experiment parameters: {sorted(unknown)}")
    spec = ExperimentSpec(**d)
    if gen is not None:
        spec.gen = gen
    if sim is not None:
        spec.sim = sim
    elif sys is not None:
        spec.sim = replace(spec.sim, sys=sys)
    return spec
