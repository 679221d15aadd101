"""Command-line front end: gen | analyze | sim | experiment.

Exit codes: 0 success, 1 usage or configuration error, 2 simulator
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .analysis import analyze
from .config import ConfigError, read_config
from .experiment import derive_seed, run_experiment
from .simulator import SimulationInvariantError, Simulator, summarize
from .task_model import TaskSet
from .taskset_gen import generate

log = logging.getLogger("mescsim")

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mescsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("gen", parents=[common], help="generate task sets as JSON")

    a = sub.add_parser("analyze", parents=[common], help="response-time analysis of a task set")
    a.add_argument("taskset")

    s = sub.add_parser("sim", parents=[common], help="simulate one task set")
    s.add_argument("taskset")
    s.add_argument("--preemption", choices=["none", "limited", "instr"])
    s.add_argument("--policy", choices=["mesc", "amc"])
    s.add_argument("--trace", help="write a per-event CSV here")

    e = sub.add_parser("experiment", parents=[common], help="multi-seed sweeps")
    e.add_argument("--plots", action="store_true", help="also render SVG plots")
    return p


def _load_taskset(path: str) -> TaskSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return TaskSet.from_json(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: not a valid task set ({exc})") from exc


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen(args, cfg) -> int:
    master = cfg.gen.seed if args.seed is None else args.seed
    out_dir = Path(args.out or ".")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {out_dir}: {exc}") from exc
    for k in range(cfg.count):
        seed = master if cfg.count == 1 else derive_seed(master, k)
        gen = replace(cfg.gen, seed=seed)
        gamma = generate(gen, cfg.system, cfg.profile)
        path = out_dir / f"taskset_{k:04d}.json"
        path.write_text(gamma.to_json({"seed": seed, "gen": gen.to_dict()}) + "\n", encoding="utf-8")
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_analyze(args, cfg) -> int:
    gamma = _load_taskset(args.taskset)
    result = analyze(gamma, cfg.system)
    _emit(result.to_csv(), args.out)
    return EXIT_OK


def cmd_sim(args, cfg) -> int:
    gamma = _load_taskset(args.taskset)
    sim = cfg.sim
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    if args.preemption:
        sim = replace(sim, preemption_mode=args.preemption)
    if args.policy:
        sim = replace(sim, policy=args.policy)
    if args.trace:
        sim = replace(sim, record_events=True)
    simulator = Simulator(gamma, sim)
    metrics = simulator.run()
    if args.trace:
        _emit(simulator.events_csv(), args.trace)
    doc = metrics.to_dict()
    doc["summary"] = summarize(metrics)
    doc["config"] = {"seed": sim.seed, "preemption": sim.preemption_mode.value, "policy": sim.policy.value}
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_experiment(args, cfg) -> int:
    spec = cfg.experiment
    if args.seed is not None:
        spec.master_seed = args.seed
    written = run_experiment(spec, Path(args.out or "results"), plots=args.plots, profile=cfg.profile)
    for name, path in written.items():
        log.info("%s -> %s", name, path)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "analyze": cmd_analyze, "sim": cmd_sim, "experiment": cmd_experiment}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = read_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"mescsim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationInvariantError as exc:
        print(f"mescsim: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
