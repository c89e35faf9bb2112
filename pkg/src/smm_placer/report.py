"""Delimited result files and the matplotlib figures rendered next to them.

All CSVs format floats with repr so reruns are byte-identical; figures are
rendered headlessly (Agg) into the same output directory.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Ellipse

from .optimizer import AggregateReport, EvaluationReport, MemoizedObjective

EVALUATION_HEADER = ["design", "task_id", "sr_percent", "md"]
AGGREGATE_HEADER = ["design", "n_tasks", "sr_star_percent", "md_star"]
DESIGNS_HEADER = ["x", "y", "z", "theta", "xi", "score", "cache_hits"]
TRACE_HEADER = ["iteration", "best_score"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_manifest(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def design_label(rho) -> str:
    return "({:g}, {:g}, {:g}, {:g}, {:g})".format(rho.x, rho.y, rho.z, rho.theta, rho.xi)


def write_trace_csv(path, trace) -> None:
    write_csv(path, TRACE_HEADER, [[i, float(s)] for i, s in enumerate(trace)])


def write_designs_csv(path, memo: MemoizedObjective) -> None:
    """One row per visited grid point: snapped values, score, hit count."""
    rows = []
    for key in sorted(memo.cache):
        vals = memo.grid.values_at(key)
        rows.append([*map(float, vals), memo.cache[key], memo.hits_by_key[key]])
    write_csv(path, DESIGNS_HEADER, rows)


def write_evaluation_csv(path, labeled_reports: list[tuple[str, EvaluationReport]],
                         aggregates: list[tuple[str, AggregateReport]]) -> None:
    rows = [[label, r.task_id, r.success_rate, r.mean_density]
            for label, r in labeled_reports]
    write_csv(path, EVALUATION_HEADER, rows)
    agg_path = Path(path).with_name(Path(path).stem + "_aggregate.csv")
    write_csv(agg_path, AGGREGATE_HEADER,
              [[label, a.n_tasks, a.success_rate, a.mean_density]
               for label, a in aggregates])


def render_trace_figure(path, trace) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(range(len(trace)), trace, marker="o", ms=3)
    ax.set_xlabel("evaluation round")
    ax.set_ylabel("best task metric")
    ax.set_title("swarm convergence")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _group(labeled_reports):
    by_label: dict[str, list[EvaluationReport]] = {}
    for label, r in labeled_reports:
        by_label.setdefault(label, []).append(r)
    return by_label


def _boxplot(path, by_label, attr, ylabel, opt_task_id):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    labels = list(by_label)
    data = [[getattr(r, attr) for r in rs] for rs in by_label.values()]
    ax.boxplot(data, tick_labels=labels)
    for i, rs in enumerate(by_label.values()):
        for r in rs:
            if r.task_id == opt_task_id:
                ax.plot(i + 1, getattr(r, attr), "x", color="tab:red", ms=9, mew=2)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _sigma_ellipse(ax, xs, ys, color):
    if len(xs) < 2:
        return
    cov = np.cov(np.vstack([xs, ys]))
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals, 0.0, None)
    angle = float(np.degrees(np.arctan2(vecs[1, 1], vecs[0, 1])))
    ell = Ellipse((np.mean(xs), np.mean(ys)),
                  width=4.0 * np.sqrt(vals[1]), height=4.0 * np.sqrt(vals[0]),
                  angle=angle, facecolor=color, alpha=0.15, edgecolor=color)
    ax.add_patch(ell)


def render_benchmark_figures(out_dir, labeled_reports, opt_task_id: str) -> list[Path]:
    """Boxplots of SR and MD per design plus the MD-vs-SR scatter with
    2-sigma ellipses; returns the created file paths."""
    out_dir = Path(out_dir)
    by_label = _group(labeled_reports)
    paths = [out_dir / "success_rate_box.png", out_dir / "density_box.png",
             out_dir / "density_vs_success.png"]
    _boxplot(paths[0], by_label, "success_rate", "success rate [%]", opt_task_id)
    _boxplot(paths[1], by_label, "mean_density", "manipulability density", opt_task_id)
    fig, ax = plt.subplots(figsize=(5.4, 4))
    colors = plt.cm.tab10.colors
    for i, (label, rs) in enumerate(by_label.items()):
        xs = [r.mean_density for r in rs]
        ys = [r.success_rate for r in rs]
        color = colors[i % len(colors)]
        ax.scatter(xs, ys, s=18, color=color, label=label)
        _sigma_ellipse(ax, xs, ys, color)
    ax.set_xlabel("manipulability density")
    ax.set_ylabel("success rate [%]")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(paths[2])
    plt.close(fig)
    return paths
