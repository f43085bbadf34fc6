"""Figure rendering for experiment result tables.

Each builder takes rows as written by the harness (or read back from CSV)
and saves a PNG; the dispatcher picks builders by the experiment column so
`plot` works on any harness output without extra flags.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .exceptions import ConfigError


def read_csv(path) -> list:
    """Rows with numeric fields parsed; blanks stay empty strings."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                if value is None or value == "":
                    parsed[key] = ""
                    continue
                try:
                    parsed[key] = float(value)
                except ValueError:
                    parsed[key] = value
            rows.append(parsed)
    if not rows:
        raise ConfigError(f"no rows in {path}")
    return rows


def _ok(rows):
    return [r for r in rows if r.get("status", "ok") == "ok"]


def _grouped_stats(rows, value="objective_s"):
    """variant -> (grid sorted, mean, stderr) over finite values."""
    buckets = defaultdict(lambda: defaultdict(list))
    for r in _ok(rows):
        val = r.get(value, "")
        if val == "" or not np.isfinite(val):
            continue
        grid = r.get("grid_value", "")
        # single-point runs leave the grid column blank
        buckets[r.get("variant", "")][grid if grid != "" else 0.0].append(val)
    out = {}
    for variant, per_grid in buckets.items():
        grid = sorted(per_grid)
        mean = np.array([np.mean(per_grid[g]) for g in grid])
        err = np.array([
            np.std(per_grid[g], ddof=1) / np.sqrt(len(per_grid[g]))
            if len(per_grid[g]) > 1 else 0.0
            for g in grid])
        out[variant] = (np.array(grid, dtype=float), mean, err)
    return out


_SWEEP_XLABEL = {
    "sweep_power": "transmit power budget (W)",
    "sweep_elements": "reflecting elements per surface",
    "sweep_allocation": "elements assigned to the energy surface",
    "leakage_sweep": "information-surface elements",
    "pilot_sweep": "pilot overhead (symbols)",
}


def plot_sweep(rows, out_path, value="objective_s", logy=False):
    kind = _ok(rows)[0].get("experiment", "sweep")
    stats = _grouped_stats(rows, value=value)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for variant in sorted(stats):
        grid, mean, err = stats[variant]
        ax.errorbar(grid, mean, yerr=err, marker="o", capsize=3,
                    label=variant)
    ax.set_xlabel(_SWEEP_XLABEL.get(kind, "grid value"))
    ax.set_ylabel("weighted latency (s)" if value == "objective_s" else value)
    if logy:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_convergence(trace_rows, out_path):
    """Objective trajectories of the alternating solver, one line per seed."""
    per_seed = defaultdict(list)
    for r in trace_rows:
        per_seed[r.get("seed", 0)].append(r)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for seed in sorted(per_seed):
        seq = per_seed[seed]
        ax.plot(range(len(seq)), [r["objective_s"] for r in seq],
                alpha=0.7, linewidth=1.0)
    ax.set_xlabel("block update")
    ax.set_ylabel("weighted latency (s)")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_leakage(rows, out_path):
    return plot_sweep(rows, out_path, value="leakage", logy=True)


def plot_trajectory(rows, out_path):
    """Per-slot latency along the track, mitigated vs unmitigated."""
    stats = _grouped_stats(rows, value="objective_s")
    nodm = _grouped_stats(rows, value="objective_nodm_s")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for variant in sorted(stats):
        grid, mean, err = stats[variant]
        ax.errorbar(grid, mean, yerr=err, marker="o", capsize=3,
                    label=f"{variant} (applied)")
    for variant in sorted(nodm):
        grid, mean, _ = nodm[variant]
        ax.plot(grid, mean, linestyle="--", alpha=0.6,
                label=f"{variant} (before mitigation)")
    ax.set_xlabel("train position along the track (m)")
    ax.set_ylabel("weighted latency (s)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render(csv_path, out_dir) -> list:
    """Dispatch on the experiment column; returns the files written."""
    rows = read_csv(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(csv_path).stem
    written = []

    if "block" in rows[0]:  # a solver trace table
        written.append(plot_convergence(rows, out_dir / f"{stem}_convergence.png"))
        return [str(p) for p in written]

    kinds = {r.get("experiment") for r in _ok(rows)}
    if not kinds:
        raise ConfigError("no successful rows to plot")
    kind = kinds.pop()
    if kind == "solve":
        trace_file = Path(csv_path).with_name(Path(csv_path).stem + "_trace.csv")
        if trace_file.exists():
            written.append(plot_convergence(read_csv(trace_file),
                                            out_dir / f"{stem}_convergence.png"))
        written.append(plot_sweep(rows, out_dir / f"{stem}_objective.png"))
    elif kind == "leakage_sweep":
        written.append(plot_leakage(rows, out_dir / f"{stem}_leakage.png"))
        written.append(plot_sweep(rows, out_dir / f"{stem}_objective.png"))
    elif kind == "train_sweep":
        written.append(plot_trajectory(rows, out_dir / f"{stem}_trajectory.png"))
    else:
        written.append(plot_sweep(rows, out_dir / f"{stem}_objective.png"))
    return [str(p) for p in written]
