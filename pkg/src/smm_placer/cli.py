"""Command-line pipeline: task generation, design optimization, evaluation
and the benchmark reproduction run.

Subcommands: generate-tasks, optimize, evaluate, benchmark. Reports are
written as CSV plus rendered figures; every run writes a manifest that can
be fed back through --config to reproduce it. Exit codes: 0 success, 1
usage error, 2 input parse error, 3 internal numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__, report
from .collision import SemiEllipticCylinder
from .dualarm import DesignParams, dual_task_metric
from .errors import ParseError
from .kinematics import KinematicChain
from .optimizer import (
    GridSpec,
    MemoizedObjective,
    PsoParams,
    default_grid,
    evaluate_design,
    pso_optimize,
)
from .robot_config import builtin_robot_path, load_robot_config
from .scenario import CanopyConfig, default_ridge, generate_task, load_task, save_task
from .smm import SmmParams

log = logging.getLogger("smm_placer.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NUMERIC = 3

EXPERT_DESIGN = DesignParams(0.175, 0.35, 0.4, 0.0, 0.0)

_CRITERION_MAP = {"md": "density", "m": "max"}

_PRESETS = {
    "desk": dict(n_targets=10, swarm_size=12, iterations=6, ik_restarts=20,
                 continuation_step=0.05, max_samples_per_component=600, held_out=10),
    "paper": dict(n_targets=20, swarm_size=30, iterations=10, ik_restarts=50,
                  continuation_step=0.02, max_samples_per_component=1500, held_out=10),
}


@dataclass
class RunConfig:
    """Fully resolved run parameters; serialized into every manifest."""

    robot: str
    master_seed: int
    criterion: str  # "md" | "m"
    threads: int
    held_out: int
    preset: str
    out_dir: Path
    grid: GridSpec
    pso: PsoParams
    smm: SmmParams
    canopy: CanopyConfig

    @property
    def metric_criterion(self) -> str:
        return _CRITERION_MAP[self.criterion]

    def robot_path(self) -> Path:
        if self.robot.startswith("builtin:"):
            return builtin_robot_path(self.robot.split(":", 1)[1])
        return Path(self.robot)

    def load_chain(self) -> KinematicChain:
        return load_robot_config(self.robot_path())

    def to_doc(self) -> dict:
        g = self.grid
        return {
            "robot": self.robot,
            "seed": self.master_seed,
            "criterion": self.criterion,
            "threads": self.threads,
            "held_out_tasks": self.held_out,
            "preset": self.preset,
            "out": str(self.out_dir),
            "grid": {
                "x": list(g.x), "y": list(g.y), "z": list(g.z),
                "theta_deg": [math.degrees(v) for v in g.theta],
                "xi_deg": [math.degrees(v) for v in g.xi],
            },
            "pso": {
                "swarm_size": self.pso.swarm_size,
                "iterations": self.pso.iterations,
                "inertia_weight": self.pso.inertia_weight,
                "cognitive_coeff": self.pso.cognitive_coeff,
                "social_coeff": self.pso.social_coeff,
                "polish_sweeps": self.pso.polish_sweeps,
            },
            "smm": {
                "ik_restarts": self.smm.ik_restarts,
                "ik_max_iters": self.smm.ik_max_iters,
                "ik_damping": self.smm.ik_damping,
                "pos_tol": self.smm.pos_tol,
                "ori_tol": self.smm.ori_tol,
                "continuation_step": self.smm.continuation_step,
                "max_samples_per_component": self.smm.max_samples_per_component,
                "dedupe_radius": self.smm.dedupe_radius,
            },
            "canopy": {
                "n_targets": self.canopy.n_targets,
                "peduncle_offset": self.canopy.peduncle_offset,
                "delta1_std": self.canopy.delta1_std,
                "delta2_std": self.canopy.delta2_std,
                "margin": self.canopy.margin,
                "ridge": {
                    "center": self.canopy.ridge.center.tolist(),
                    "height": self.canopy.ridge.height,
                    "width": self.canopy.ridge.width,
                    "length": self.canopy.ridge.length,
                },
            },
        }

    def executor(self) -> ThreadPoolExecutor | None:
        return ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None


def _load_config_doc(path: str) -> dict:
    p = Path(path)
    try:
        doc = yaml.safe_load(p.read_text())
    except OSError as e:
        raise ParseError(f"cannot read config {p}: {e}")
    except yaml.YAMLError as e:
        raise ParseError(f"{p}: invalid config: {e}")
    if not isinstance(doc, dict):
        raise ParseError(f"{p}: expected a mapping at top level")
    if "run_config" in doc:  # a manifest; replay its embedded config
        doc = doc["run_config"]
    return doc


def _triple(doc, key, where, convert=float):
    v = doc.get(key)
    if not isinstance(v, list) or len(v) != 3:
        raise ParseError(f"{where}: '{key}' must be [min, step, max]")
    return tuple(convert(x) for x in v)


def _grid_from_doc(doc) -> GridSpec:
    if doc is None:
        return default_grid()
    where = "config grid"
    rad = lambda v: math.radians(float(v))
    try:
        return GridSpec(
            x=_triple(doc, "x", where),
            y=_triple(doc, "y", where),
            z=_triple(doc, "z", where),
            theta=_triple(doc, "theta_deg", where, rad),
            xi=_triple(doc, "xi_deg", where, rad),
        )
    except ValueError as e:
        raise ParseError(f"{where}: {e}")


def resolve_config(args) -> RunConfig:
    preset = getattr(args, "preset", None) or "desk"
    base = _PRESETS[preset]
    doc = _load_config_doc(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "preset", None) is None and "preset" in doc:
        preset = doc["preset"]
        if preset not in _PRESETS:
            raise ParseError(f"unknown preset {preset!r}")
        base = _PRESETS[preset]
    seed = args.seed if getattr(args, "seed", None) is not None else int(doc.get("seed", 42))
    criterion = getattr(args, "criterion", None) or doc.get("criterion", "md")
    if criterion not in _CRITERION_MAP:
        raise ParseError(f"criterion must be 'm' or 'md', got {criterion!r}")
    threads = getattr(args, "threads", None) or doc.get("threads") or (os.cpu_count() or 1)
    out_dir = Path(getattr(args, "out", None) or doc.get("out", "runs/latest"))
    pso_doc = doc.get("pso", {})
    smm_doc = doc.get("smm", {})
    canopy_doc = doc.get("canopy", {})
    try:
        pso = PsoParams(
            swarm_size=int(pso_doc.get("swarm_size", base["swarm_size"])),
            iterations=int(pso_doc.get("iterations", base["iterations"])),
            inertia_weight=float(pso_doc.get("inertia_weight", 0.5)),
            cognitive_coeff=float(pso_doc.get("cognitive_coeff", 2.0)),
            social_coeff=float(pso_doc.get("social_coeff", 2.0)),
            seed=seed,
            polish_sweeps=int(pso_doc.get("polish_sweeps", 2)),
        )
        smm = SmmParams(
            ik_restarts=int(smm_doc.get("ik_restarts", base["ik_restarts"])),
            ik_max_iters=int(smm_doc.get("ik_max_iters", 100)),
            ik_damping=float(smm_doc.get("ik_damping", 0.05)),
            pos_tol=float(smm_doc.get("pos_tol", 1e-4)),
            ori_tol=float(smm_doc.get("ori_tol", 1e-3)),
            continuation_step=float(smm_doc.get("continuation_step", base["continuation_step"])),
            max_samples_per_component=int(smm_doc.get("max_samples_per_component",
                                                      base["max_samples_per_component"])),
            dedupe_radius=float(smm_doc.get("dedupe_radius", 0.05)),
        )
        ridge_doc = canopy_doc.get("ridge")
        if ridge_doc is not None:
            ridge = SemiEllipticCylinder(
                center=np.array(ridge_doc["center"], dtype=float),
                height=float(ridge_doc["height"]),
                width=float(ridge_doc["width"]),
                length=float(ridge_doc["length"]),
            )
        else:
            ridge = default_ridge()
        canopy = CanopyConfig(
            ridge=ridge,
            peduncle_offset=float(canopy_doc.get("peduncle_offset", 0.12)),
            delta1_std=float(canopy_doc.get("delta1_std", 0.35)),
            delta2_std=float(canopy_doc.get("delta2_std", 0.5)),
            n_targets=int(canopy_doc.get("n_targets", base["n_targets"])),
            margin=float(canopy_doc.get("margin", 0.02)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"invalid run configuration: {e}")
    return RunConfig(
        robot=str(doc.get("robot", "builtin:xarm7_like")),
        master_seed=seed,
        criterion=criterion,
        threads=int(threads),
        held_out=int(doc.get("held_out_tasks", base["held_out"])),
        preset=preset,
        out_dir=out_dir,
        grid=_grid_from_doc(doc.get("grid")),
        pso=pso,
        smm=smm,
        canopy=canopy,
    )


def _manifest_doc(cfg: RunConfig, command: str, **extra) -> dict:
    return {"command": command, "package_version": __version__,
            "run_config": cfg.to_doc(), **extra}


def cmd_generate_tasks(cfg: RunConfig, count: int) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(count):
        task = generate_task(cfg.canopy, cfg.master_seed + i, f"task-{i:03d}")
        path = cfg.out_dir / f"task_{i:03d}.json"
        save_task(task, path)
        names.append(path.name)
    report.write_manifest(cfg.out_dir / "manifest.json",
                          _manifest_doc(cfg, "generate-tasks", count=count, outputs=names))
    print(f"wrote {count} task file(s) to {cfg.out_dir}")
    return EXIT_OK


def _optimize(cfg: RunConfig, task, chain, criterion: str, executor):
    objective = MemoizedObjective(
        lambda rho: dual_task_metric(rho, task, chain, criterion, cfg.smm,
                                     seed=cfg.master_seed),
        cfg.grid)
    return pso_optimize(objective, cfg.grid, cfg.pso, executor)


def _design_doc(rho: DesignParams, score: float | None = None) -> dict:
    doc = {"x": rho.x, "y": rho.y, "z": rho.z,
           "theta": rho.theta, "xi": rho.xi,
           "theta_deg": math.degrees(rho.theta), "xi_deg": math.degrees(rho.xi)}
    if score is not None:
        doc["score"] = score
    return doc


def cmd_optimize(cfg: RunConfig, task_path: str) -> int:
    chain = cfg.load_chain()
    task = load_task(task_path)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    executor = cfg.executor()
    try:
        res = _optimize(cfg, task, chain, cfg.metric_criterion, executor)
    finally:
        if executor is not None:
            executor.shutdown()
    report.write_trace_csv(cfg.out_dir / "trace.csv", res.trace)
    report.write_designs_csv(cfg.out_dir / "designs.csv", res.objective)
    report.render_trace_figure(cfg.out_dir / "trace.png", res.trace)
    report.write_manifest(cfg.out_dir / "best_design.json", _design_doc(res.best, res.score))
    report.write_manifest(
        cfg.out_dir / "manifest.json",
        _manifest_doc(cfg, "optimize", task_file=str(task_path),
                      best_design=_design_doc(res.best, res.score),
                      no_feasible_design=bool(res.score <= 0.0),
                      cache_misses=res.objective.misses, cache_hits=res.objective.hits,
                      outputs=["trace.csv", "designs.csv", "trace.png", "best_design.json"]))
    print(f"best design: {report.design_label(res.best)}  score={res.score:.6g}")
    if res.score <= 0.0:
        print("no feasible design found in the search space")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, design: DesignParams, task_paths: list[str]) -> int:
    chain = cfg.load_chain()
    tasks = [load_task(p) for p in task_paths]
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    executor = cfg.executor()
    try:
        reports, agg = evaluate_design(design, tasks, chain, cfg.smm,
                                       seed=cfg.master_seed, executor=executor)
    finally:
        if executor is not None:
            executor.shutdown()
    label = report.design_label(design)
    labeled = [(label, r) for r in reports]
    report.write_evaluation_csv(cfg.out_dir / "evaluation.csv", labeled, [(label, agg)])
    if reports:
        report.render_benchmark_figures(cfg.out_dir, labeled, opt_task_id=reports[0].task_id)
    report.write_manifest(
        cfg.out_dir / "manifest.json",
        _manifest_doc(cfg, "evaluate", design=_design_doc(design),
                      task_files=[str(p) for p in task_paths],
                      aggregate={"sr_star_percent": agg.success_rate,
                                 "md_star": agg.mean_density},
                      outputs=["evaluation.csv", "evaluation_aggregate.csv"]))
    print(f"{label}: SR*={agg.success_rate:.1f}%  MD*={agg.mean_density:.6g} "
          f"over {agg.n_tasks} task(s)")
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    chain = cfg.load_chain()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    task_dir = cfg.out_dir / "tasks"
    task_dir.mkdir(exist_ok=True)
    tasks = []
    for i in range(1 + cfg.held_out):
        task = generate_task(cfg.canopy, cfg.master_seed + i, f"task-{i:03d}")
        save_task(task, task_dir / f"task_{i:03d}.json")
        tasks.append(task)
    opt_task = tasks[0]
    executor = cfg.executor()
    designs: dict[str, DesignParams] = {}
    best_docs = {}
    try:
        for label, criterion in (("MD", "density"), ("M", "max")):
            log.info("optimizing under the %s criterion", label)
            res = _optimize(cfg, opt_task, chain, criterion, executor)
            designs[label] = res.best
            best_docs[label] = _design_doc(res.best, res.score)
            stem = label.lower()
            report.write_trace_csv(cfg.out_dir / f"trace_{stem}.csv", res.trace)
            report.write_designs_csv(cfg.out_dir / f"designs_{stem}.csv", res.objective)
            report.render_trace_figure(cfg.out_dir / f"trace_{stem}.png", res.trace)
        designs["E"] = EXPERT_DESIGN
        labeled = []
        aggregates = []
        for label, rho in designs.items():
            log.info("evaluating design %s over %d tasks", label, len(tasks))
            reports, agg = evaluate_design(rho, tasks, chain, cfg.smm,
                                           seed=cfg.master_seed, executor=executor)
            labeled.extend((label, r) for r in reports)
            aggregates.append((label, agg))
    finally:
        if executor is not None:
            executor.shutdown()
    report.write_evaluation_csv(cfg.out_dir / "benchmark.csv", labeled, aggregates)
    figures = report.render_benchmark_figures(cfg.out_dir, labeled, opt_task_id=opt_task.id)
    report.write_manifest(
        cfg.out_dir / "manifest.json",
        _manifest_doc(cfg, "benchmark", designs=best_docs,
                      aggregate={label: {"sr_star_percent": a.success_rate,
                                         "md_star": a.mean_density}
                                 for label, a in aggregates},
                      outputs=["benchmark.csv", "benchmark_aggregate.csv"]
                              + [f.name for f in figures]))
    for label, agg in aggregates:
        print(f"{label}: SR*={agg.success_rate:.1f}%  MD*={agg.mean_density:.6g}")
    return EXIT_OK


def _parse_design(text: str) -> DesignParams:
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError(
            "design must be 'x,y,z,theta_deg,xi_deg' (5 comma-separated values)")
    try:
        x, y, z, t_deg, xi_deg = (float(p) for p in parts)
        return DesignParams(x, y, z, math.radians(t_deg), math.radians(xi_deg))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="run config YAML (or a manifest to replay)")
    common.add_argument("--seed", type=int, help="master seed (default 42)")
    common.add_argument("--threads", type=int, help="worker threads (default: machine)")
    common.add_argument("--preset", choices=sorted(_PRESETS),
                        help="parameter preset (default desk)")
    common.add_argument("--criterion", choices=["m", "md"],
                        help="optimization criterion: m(anipulability) or md (density)")
    common.add_argument("--out", help="output directory")
    parser = _Parser(prog="smm-placer",
                     description="Dual-arm base placement optimization on "
                                 "self-motion manifold task metrics")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("generate-tasks", parents=[common],
                       help="write deterministic task files")
    p.add_argument("--count", type=int, required=True, help="number of task files")
    p = sub.add_parser("optimize", parents=[common],
                       help="swarm-search the design grid for one task")
    p.add_argument("--task", required=True, help="task file to optimize for")
    p = sub.add_parser("evaluate", parents=[common],
                       help="score a fixed design over task files")
    p.add_argument("--design", type=_parse_design, required=True,
                   help="design as 'x,y,z,theta_deg,xi_deg'")
    p.add_argument("--tasks", nargs="+", required=True, help="task files")
    p = sub.add_parser("benchmark", parents=[common],
                       help="optimize under both criteria and compare with the expert design")
    return parser


def _configure_logging():
    level = os.environ.get("SMM_PLACER_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        if args.command == "generate-tasks":
            if args.count < 0:
                raise _UsageError("--count must be non-negative")
            return cmd_generate_tasks(cfg, args.count)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.task)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.design, args.tasks)
        if args.command == "benchmark":
            return cmd_benchmark(cfg)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except ParseError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_PARSE
    except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as e:
        sys.stderr.write(f"numerical failure: {e}\n")
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
