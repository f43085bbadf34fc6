"""Experiment harness: seeded sweeps, benchmark variants, CSV emission.

Every cell of a sweep owns an isolated RNG derived from
(master_seed, grid_index, realization_index, domain_tag), so results are
reproducible row-by-row and benchmark variants see identical channels for
paired comparisons. Output tables use one pinned column set across all
experiment kinds; fields that do not apply stay blank.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .doppler import (CoherenceModel, DopplerContext, cascaded_doppler_spread,
                      direct_doppler, effective_rate_factor, mitigate_phases)
from .exceptions import ConfigError, ExperimentError
from .linkmetrics import effective_channels, leakage as leakage_of, \
    sinr_and_capacity, upload_latency_objective
from .outerloop import BcdOptions, bcd_solve
from .scenario import BANDS, ChannelSet, SystemConfig, TrainState, \
    build_channel_set

KINDS = ("solve", "sweep_power", "sweep_elements", "sweep_allocation",
         "leakage_sweep", "train_sweep", "pilot_sweep")

STATIC_VARIANTS = ("optimized", "random_W", "no_irs1", "no_irs2",
                   "random_phase_irs1", "random_phase_irs2")
TRAIN_VARIANTS = ("optimized", "no_doppler_mitigation")

DEFAULT_TRAIN_GRID = (-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)

_DEFAULT_GRIDS = {
    "solve": (float("nan"),),
    "sweep_power": (1.0, 2.0, 5.0, 10.0, 15.0, 20.0),
    "sweep_elements": (25.0, 50.0, 100.0, 150.0, 200.0),
    "sweep_allocation": (0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0),
    "leakage_sweep": (25.0, 50.0, 100.0, 150.0, 200.0),
    "train_sweep": DEFAULT_TRAIN_GRID,
    "pilot_sweep": (0.0, 200.0, 600.0, 1200.0, 2400.0, 6000.0),
}

# channel draw / solver init / variant randomness domains of the cell RNG
_TAG_CHANNELS, _TAG_SOLVER, _TAG_VARIANT = 0, 1, 2


@dataclass
class ExperimentSpec:
    kind: str
    config: SystemConfig = field(default_factory=SystemConfig)
    variant: str = "optimized"
    grid: tuple = ()
    realizations: int = 1
    seed: int = 0
    out: str | None = None
    parallelism: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        allowed = TRAIN_VARIANTS if self.kind in ("train_sweep", "pilot_sweep") \
            else STATIC_VARIANTS
        if self.variant not in allowed:
            raise ConfigError(
                f"variant {self.variant!r} not valid for kind {self.kind!r};"
                f" choose from {allowed}")
        if not self.grid:
            self.grid = _DEFAULT_GRIDS[self.kind]
        self.grid = tuple(float(g) for g in self.grid)
        if self.realizations < 1:
            raise ConfigError("realizations must be at least 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")


@dataclass
class ResultTable:
    columns: list
    rows: list  # list of dicts keyed by column name

    def column(self, name, rows=None):
        rows = self.rows if rows is None else rows
        return [r.get(name, "") for r in rows]


def base_columns(num_iotds: int) -> list:
    cols = ["experiment", "variant", "grid_value", "seed", "objective_s",
            "leakage", "beta", "iterations", "wall_ms"]
    cols += [f"d_{i + 1}" for i in range(num_iotds)]
    cols += ["slot", "position", "f_dd_hz", "f_dc_hz", "objective_nodm_s",
             "sdp_iterations", "sdp_duality_gap", "sdp_psd_violation",
             "sdp_diag_violation", "sdp_eq_violation", "status", "error"]
    return cols


def _cell_seed(master: int, grid_idx: int, seed_idx: int, tag: int,
               *extra) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        (int(master), int(grid_idx), int(seed_idx), int(tag))
        + tuple(int(e) for e in extra))


def _zeroed(arr):
    return np.zeros_like(arr)


def _apply_variant(variant: str, cfg: SystemConfig, channels: ChannelSet,
                   rng: np.random.Generator):
    """Returns (channels, extra BcdOptions fields) realizing a benchmark."""
    if variant in ("optimized", "no_doppler_mitigation"):
        return channels, {}
    if variant == "random_W":
        wbar = (rng.uniform(0.0, 1.0, size=(cfg.m1, cfg.m1))
                + 1j * rng.uniform(0.0, 1.0, size=(cfg.m1, cfg.m1)))
        w_fixed = np.sqrt(cfg.p_max) * wbar / np.linalg.norm(wbar)
        return channels, {"fixed_w": w_fixed,
                          "skip_blocks": frozenset({"energy_beams"})}
    if variant == "no_irs1":
        ch = replace(channels, h_r=_zeroed(channels.h_r))
        return ch, {"skip_blocks": frozenset({"theta1"})}
    if variant == "no_irs2":
        ch = replace(channels,
                     g_r={b: _zeroed(v) for b, v in channels.g_r.items()},
                     d_eaves={b: _zeroed(v) for b, v in channels.d_eaves.items()})
        return ch, {"skip_blocks": frozenset({"theta2"})}
    if variant == "random_phase_irs1":
        return channels, {"skip_blocks": frozenset({"theta1"})}
    if variant == "random_phase_irs2":
        return channels, {"skip_blocks": frozenset({"theta2"})}
    raise ConfigError(f"unknown variant {variant!r}")


def _cell_config(kind: str, cfg: SystemConfig, grid_value: float) -> SystemConfig:
    """Specialize the base config for one grid point.

    Element sweeps that hit zero keep one element and zero its channels at
    build time, so every matrix keeps a valid shape.
    """
    if kind in ("solve", "train_sweep"):
        return cfg
    if kind == "sweep_power":
        if grid_value <= 0:
            raise ConfigError("power grid values must be positive")
        return replace(cfg, p_max=float(grid_value))
    if kind == "sweep_elements":
        n = max(int(round(grid_value)), 1)
        return cfg.with_counts(n1=n, n2=n)
    if kind == "sweep_allocation":
        total = cfg.n1 + cfg.n2
        n1 = int(round(grid_value))
        if not 0 <= n1 <= total:
            raise ConfigError(f"allocation {n1} outside [0, {total}]")
        return cfg.with_counts(n1=max(n1, 1), n2=max(total - n1, 1))
    if kind == "leakage_sweep":
        return cfg.with_counts(n2=max(int(round(grid_value)), 1))
    if kind == "pilot_sweep":
        if grid_value < 0:
            raise ConfigError("pilot overhead cannot be negative")
        return replace(cfg, pilot_overhead=float(grid_value))
    raise ConfigError(f"unknown experiment kind {kind!r}")


def _zero_dropped_elements(kind: str, cfg: SystemConfig, grid_value: float,
                           channels: ChannelSet) -> ChannelSet:
    """A swept element count of zero means the surface is absent: its
    reflected channels vanish while the single placeholder element keeps
    shapes intact."""
    if kind == "sweep_allocation":
        if int(round(grid_value)) == 0:
            channels = replace(channels, h_r=_zeroed(channels.h_r))
        if int(round(grid_value)) == cfg.n1 + cfg.n2:
            channels = replace(
                channels,
                g_r={b: _zeroed(v) for b, v in channels.g_r.items()},
                d_eaves={b: _zeroed(v) for b, v in channels.d_eaves.items()})
    return channels


def _solution_row(kind, variant, grid_value, seed_idx, sol, wall_ms):
    row = {
        "experiment": kind,
        "variant": variant,
        "grid_value": "" if np.isnan(grid_value) else grid_value,
        "seed": seed_idx,
        "objective_s": sol.report.objective,
        "leakage": sol.report.leakage,
        "beta": sol.downlink.beta,
        "iterations": sol.outer_iterations,
        "wall_ms": wall_ms,
        "status": "ok",
        "error": "",
    }
    for i, d in enumerate(sol.report.latency):
        row[f"d_{i + 1}"] = float(d)
    if sol.sdp_diagnostics:
        diag = sol.sdp_diagnostics
        row["sdp_iterations"] = diag["iterations"]
        row["sdp_duality_gap"] = diag["duality_gap"]
        row["sdp_psd_violation"] = diag["psd_violation"]
        row["sdp_diag_violation"] = diag["diag_violation"]
        row["sdp_eq_violation"] = diag["eq_violation"]
    return row


def _error_row(kind, variant, grid_value, seed_idx, exc):
    return {
        "experiment": kind,
        "variant": variant,
        "grid_value": "" if np.isnan(grid_value) else grid_value,
        "seed": seed_idx,
        "status": "error",
        "error": f"{type(exc).__name__}: {exc}",
    }


def _static_cell(spec_kind, variant, cfg, master, grid_idx, grid_value,
                 seed_idx, collect_trace):
    cell_cfg = _cell_config(spec_kind, cfg, grid_value)
    channels = build_channel_set(
        cell_cfg, rng_seed=_cell_seed(master, grid_idx, seed_idx, _TAG_CHANNELS))
    channels = _zero_dropped_elements(spec_kind, cell_cfg, grid_value, channels)
    vrng = np.random.default_rng(
        _cell_seed(master, grid_idx, seed_idx, _TAG_VARIANT))
    channels, extra = _apply_variant(variant, cell_cfg, channels, vrng)
    opts = BcdOptions(seed=_cell_seed(master, grid_idx, seed_idx, _TAG_SOLVER),
                      collect_trace=collect_trace, **extra)
    t0 = time.perf_counter()
    sol = bcd_solve(cell_cfg, channels, opts)
    wall_ms = (time.perf_counter() - t0) * 1e3
    row = _solution_row(spec_kind, variant, grid_value, seed_idx, sol, wall_ms)
    trace_rows = [
        {"seed": seed_idx, "outer": t.outer, "inner": t.inner,
         "block": t.block, "objective_s": t.objective, "psi_norm": t.psi_norm}
        for t in sol.trace
    ] if collect_trace else []
    return [row], trace_rows


def _make_penalized_evaluator(cfg, channels, sol, ctx, prev_applied, f_dd):
    """Latency objective for a candidate IRS2 phase vector including the
    coherence penalty driven by the candidate's own phase dynamics."""
    model = CoherenceModel(f_floor=cfg.f_floor)
    p = sol.report.harvested
    bp = sol.uplink.band_powers(p)

    def evaluate(theta_cand):
        theta_cand = np.asarray(theta_cand, dtype=float)
        if prev_applied is None:
            f_total = abs(f_dd)
        else:
            f_dc = cascaded_doppler_spread(ctx, theta_cand, prev_applied)
            f_total = max(abs(f_dd), f_dc)
        _, gbar = effective_channels(channels, sol.downlink.theta1, theta_cand)
        caps = {}
        for band in BANDS:
            _, cap = sinr_and_capacity(gbar[band], sol.uplink.F[band],
                                       bp[band], cfg.sigma2(band),
                                       cfg.bandwidth(band), sol.downlink.beta)
            factor = effective_rate_factor(f_total, cfg.pilot_overhead,
                                           cfg.bandwidth(band), model)
            caps[band] = cap * factor
        dead = (caps["s"] <= 0) & (caps["m"] <= 0)
        if np.any(dead):
            return np.inf
        total = caps["s"] + caps["m"]
        alpha = np.where(caps["s"] <= 0, 0.0,
                         np.where(caps["m"] <= 0, 1.0, caps["s"] / total))
        rep = upload_latency_objective(alpha, cfg.volumes, cfg.weights,
                                       caps["s"], caps["m"])
        return rep.objective

    return evaluate


def _trajectory_cell(variant, cfg, master, grid_idx, seed_idx, positions):
    """One seed's ride along the track: per-slot solve, Doppler bookkeeping,
    optional phase mitigation, warm starts between slots."""
    mitigate = variant != "no_doppler_mitigation"
    lam_m = cfg.wavelength("m")
    warm = None
    prev_applied = None
    slots = []
    for slot, pos in enumerate(positions):
        ts = TrainState.at_position(pos, cfg.v_speed, cfg.slot_dt,
                                    cfg.track_offset)
        channels = build_channel_set(
            cfg, train_state=ts,
            rng_seed=_cell_seed(master, grid_idx, seed_idx, _TAG_CHANNELS, slot))
        opts = BcdOptions(
            seed=_cell_seed(master, grid_idx, seed_idx, _TAG_SOLVER, slot),
            warm=warm, collect_trace=False)
        t0 = time.perf_counter()
        sol = bcd_solve(cfg, channels, opts)
        wall_ms = (time.perf_counter() - t0) * 1e3
        theta_star = np.asarray(sol.uplink.theta2, dtype=float)
        ctx = DopplerContext(v_speed=cfg.v_speed, slot_dt=cfg.slot_dt,
                             phi_d=ts.phi_d, phi_c=ts.phi_c,
                             wavelength=lam_m,
                             pilot_overhead=cfg.pilot_overhead)
        f_dd = direct_doppler(ctx)
        evaluate = _make_penalized_evaluator(cfg, channels, sol, ctx,
                                             prev_applied, f_dd)
        obj_nodm = float(evaluate(theta_star))
        if prev_applied is None:
            applied, obj_pen, f_dc = theta_star, obj_nodm, 0.0
        elif mitigate:
            applied = mitigate_phases(theta_star, prev_applied, ctx, evaluate)
            obj_pen = float(evaluate(applied))
            f_dc = cascaded_doppler_spread(ctx, applied, prev_applied)
        else:
            applied, obj_pen = theta_star, obj_nodm
            f_dc = cascaded_doppler_spread(ctx, theta_star, prev_applied)
        ws = sol.warm_start()
        ws.uplink = replace(sol.uplink, theta2=applied)
        warm = ws
        prev_applied = applied

        slots.append({
            "slot": slot, "position": pos, "wall_ms": wall_ms,
            "objective_s": obj_pen, "objective_nodm_s": obj_nodm,
            "f_dd_hz": f_dd, "f_dc_hz": f_dc,
            "leakage": leakage_of(channels, applied),
            "beta": sol.downlink.beta, "iterations": sol.outer_iterations,
            "latency": sol.report.latency, "sdp": sol.sdp_diagnostics,
        })
    return slots


def _trajectory_rows(spec_kind, variant, grid_value, seed_idx, slots,
                     aggregate):
    rows = []
    if aggregate:
        finite = [s["objective_s"] for s in slots if np.isfinite(s["objective_s"])]
        nodm = [s["objective_nodm_s"] for s in slots if np.isfinite(s["objective_nodm_s"])]
        row = {
            "experiment": spec_kind, "variant": variant,
            "grid_value": grid_value, "seed": seed_idx,
            "objective_s": float(np.mean(finite)) if finite else np.inf,
            "objective_nodm_s": float(np.mean(nodm)) if nodm else np.inf,
            "leakage": float(np.mean([s["leakage"] for s in slots])),
            "beta": slots[-1]["beta"],
            "iterations": sum(s["iterations"] for s in slots),
            "wall_ms": sum(s["wall_ms"] for s in slots),
            "f_dd_hz": max(abs(s["f_dd_hz"]) for s in slots),
            "f_dc_hz": max(s["f_dc_hz"] for s in slots),
            "slot": len(slots), "status": "ok", "error": "",
        }
        rows.append(row)
        return rows
    for s in slots:
        row = {
            "experiment": spec_kind, "variant": variant,
            "grid_value": s["position"], "seed": seed_idx,
            "objective_s": s["objective_s"],
            "objective_nodm_s": s["objective_nodm_s"],
            "leakage": s["leakage"], "beta": s["beta"],
            "iterations": s["iterations"], "wall_ms": s["wall_ms"],
            "slot": s["slot"], "position": s["position"],
            "f_dd_hz": s["f_dd_hz"], "f_dc_hz": s["f_dc_hz"],
            "status": "ok", "error": "",
        }
        for i, d in enumerate(s["latency"]):
            row[f"d_{i + 1}"] = float(d)
        if s["sdp"]:
            row["sdp_iterations"] = s["sdp"]["iterations"]
            row["sdp_duality_gap"] = s["sdp"]["duality_gap"]
            row["sdp_psd_violation"] = s["sdp"]["psd_violation"]
            row["sdp_diag_violation"] = s["sdp"]["diag_violation"]
            row["sdp_eq_violation"] = s["sdp"]["eq_violation"]
        rows.append(row)
    return rows


def _run_cell(job):
    """Top-level cell runner (picklable for process pools)."""
    (kind, variant, cfg, master, grid_idx, grid_value, seed_idx,
     collect_trace, positions) = job
    try:
        if kind == "train_sweep":
            # the whole trajectory is one cell keyed by the seed
            slots = _trajectory_cell(variant, cfg, master, 0, seed_idx,
                                     positions)
            return _trajectory_rows(kind, variant, grid_value, seed_idx,
                                    slots, aggregate=False), []
        if kind == "pilot_sweep":
            cell_cfg = _cell_config(kind, cfg, grid_value)
            slots = _trajectory_cell(variant, cell_cfg, master, grid_idx,
                                     seed_idx, positions)
            return _trajectory_rows(kind, variant, grid_value, seed_idx,
                                    slots, aggregate=True), []
        return _static_cell(kind, variant, cfg, master, grid_idx, grid_value,
                            seed_idx, collect_trace)
    except Exception as exc:  # cell failures become rows, not crashes
        if isinstance(exc, (KeyboardInterrupt, SystemExit)):
            raise
        return [_error_row(kind, variant, grid_value, seed_idx, exc)], []


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Execute every (grid point, realization) cell and assemble the table.

    Individual cell failures become error rows; the sweep only raises
    ExperimentError when more than a tenth of the cells failed, after the
    partial table has been written.
    """
    cfg = spec.config
    cells = []
    if spec.kind == "train_sweep":
        for seed_idx in range(spec.realizations):
            cells.append((spec.kind, spec.variant, cfg, spec.seed, 0,
                          float("nan"), seed_idx, False, spec.grid))
    else:
        collect_trace = spec.kind == "solve"
        positions = DEFAULT_TRAIN_GRID if spec.kind == "pilot_sweep" else None
        for grid_idx, grid_value in enumerate(spec.grid):
            for seed_idx in range(spec.realizations):
                cells.append((spec.kind, spec.variant, cfg, spec.seed,
                              grid_idx, grid_value, seed_idx, collect_trace,
                              positions))

    if spec.parallelism > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=spec.parallelism) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]

    rows, trace_rows = [], []
    failed_cells = 0
    for cell_rows, cell_trace in outcomes:
        rows.extend(cell_rows)
        trace_rows.extend(cell_trace)
        if any(r.get("status") == "error" for r in cell_rows):
            failed_cells += 1

    table = ResultTable(columns=base_columns(cfg.num_iotds), rows=rows)
    if spec.out:
        emit_csv(table, spec.out)
        if spec.kind == "solve" and trace_rows:
            trace_table = ResultTable(
                columns=["seed", "outer", "inner", "block", "objective_s",
                         "psi_norm"],
                rows=trace_rows)
            emit_csv(trace_table, _trace_path(spec.out))
    if failed_cells / max(len(cells), 1) > 0.1:
        raise ExperimentError(
            f"{failed_cells}/{len(cells)} cells failed; see the error column")
    return table


def _trace_path(out) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + "_trace" + (p.suffix or ".csv")))


def aggregate(table: ResultTable, value="objective_s"):
    """Mean and standard error of a column grouped by (variant, grid_value),
    skipping error rows. Returns a list of dicts sorted by group key."""
    groups = {}
    for row in table.rows:
        if row.get("status") != "ok":
            continue
        val = row.get(value, "")
        if val == "" or not np.isfinite(val):
            continue
        key = (row.get("variant", ""), row.get("grid_value", ""))
        groups.setdefault(key, []).append(float(val))
    out = []
    for (variant, grid_value) in sorted(groups, key=lambda k: (k[0], str(k[1]))):
        vals = np.asarray(groups[(variant, grid_value)])
        stderr = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out.append({"variant": variant, "grid_value": grid_value,
                    "n": len(vals), "mean": float(vals.mean()),
                    "stderr": stderr})
    return out


def compare_benchmarks(spec: ExperimentSpec, variants) -> tuple[ResultTable, ResultTable]:
    """Run the same sweep under several variants with paired seeds.

    Returns (merged rows, summary). The summary reports each variant's mean
    objective per grid point plus its gap against the first variant listed.
    """
    variants = list(variants)
    if not variants:
        raise ConfigError("compare_benchmarks needs at least one variant")
    merged_rows = []
    tables = {}
    for variant in variants:
        sub = replace(spec, variant=variant, out=None)
        table = run_experiment(sub)
        tables[variant] = table
        merged_rows.extend(table.rows)
    merged = ResultTable(columns=base_columns(spec.config.num_iotds),
                         rows=merged_rows)

    baseline = {}
    summary_rows = []
    for variant in variants:
        for g in aggregate(tables[variant]):
            key = g["grid_value"]
            if variant == variants[0]:
                baseline[key] = g["mean"]
            base = baseline.get(key)
            gap = ""
            if base not in (None, 0):
                gap = 100.0 * (g["mean"] - base) / base
            summary_rows.append({
                "variant": variant, "grid_value": key, "n": g["n"],
                "mean_objective_s": g["mean"], "stderr_s": g["stderr"],
                "gap_vs_first_pct": gap,
            })
    summary = ResultTable(
        columns=["variant", "grid_value", "n", "mean_objective_s",
                 "stderr_s", "gap_vs_first_pct"],
        rows=summary_rows)
    if spec.out:
        emit_csv(merged, spec.out)
        p = Path(spec.out)
        emit_csv(summary, str(p.with_name(p.stem + "_summary" + (p.suffix or ".csv"))))
    return merged, summary


def _format_cell(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_csv(table: ResultTable, path) -> None:
    """Write the table with a pinned column order; floats keep full
    round-trip precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_format_cell(row.get(c, "")) for c in table.columns])
