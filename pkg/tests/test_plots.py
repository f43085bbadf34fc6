"""CSV round-trip and figure rendering on synthetic result tables."""

import csv

import numpy as np
import pytest

from irslat.exceptions import ConfigError
from irslat.plots import plot_convergence, plot_sweep, read_csv, render

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return path


def _sweep_rows(kind, variants=("optimized",), grid=(1.0, 2.0, 5.0), seeds=2):
    rng = np.random.default_rng(0)
    rows = []
    for variant in variants:
        for g in grid:
            for s in range(seeds):
                rows.append({
                    "experiment": kind, "variant": variant, "grid_value": g,
                    "seed": s, "objective_s": 1.0 / g + 0.01 * rng.random(),
                    "leakage": 10.0 ** (-6 - g), "status": "ok", "error": "",
                })
    return rows


def _assert_png(path):
    data = open(path, "rb").read()
    assert data[:8] == PNG_MAGIC and len(data) > 1000


def test_read_csv_parses_numbers_keeps_text_and_blanks(tmp_path):
    path = _write_csv(tmp_path / "t.csv",
                      [{"a": "1.5", "b": "", "c": "optimized"}])
    (row,) = read_csv(path)
    assert row == {"a": 1.5, "b": "", "c": "optimized"}


def test_read_csv_header_only_raises(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("a,b\n")
    with pytest.raises(ConfigError):
        read_csv(path)


def test_plot_sweep_writes_png_and_skips_error_rows(tmp_path):
    rows = _sweep_rows("sweep_power")
    rows.append({"experiment": "sweep_power", "variant": "optimized",
                 "grid_value": 2.0, "seed": 9, "objective_s": "",
                 "leakage": "", "status": "error", "error": "boom"})
    out = plot_sweep(rows, tmp_path / "sweep.png")
    _assert_png(out)


def test_plot_convergence_writes_png(tmp_path):
    rows = [{"seed": s, "outer": 1, "inner": i, "block": "beta",
             "objective_s": 0.01 / (i + 1)}
            for s in range(2) for i in range(6)]
    _assert_png(plot_convergence(rows, tmp_path / "conv.png"))


def test_render_sweep_kind(tmp_path):
    path = _write_csv(tmp_path / "elements.csv", _sweep_rows("sweep_elements"))
    written = render(path, tmp_path / "figs")
    assert written == [str(tmp_path / "figs" / "elements_objective.png")]
    _assert_png(written[0])


def test_render_leakage_kind_two_figures(tmp_path):
    path = _write_csv(tmp_path / "leak.csv", _sweep_rows("leakage_sweep"))
    written = render(path, tmp_path)
    assert {p.rsplit("_", 1)[-1] for p in written} == \
        {"leakage.png", "objective.png"}
    for p in written:
        _assert_png(p)


def test_render_trajectory_kind(tmp_path):
    rows = []
    for pos in (-20.0, -10.0, 0.0):
        for s in range(2):
            rows.append({
                "experiment": "train_sweep", "variant": "mitigated",
                "grid_value": pos, "position": pos, "seed": s, "slot": 1,
                "objective_s": 0.002 + 1e-5 * abs(pos),
                "objective_nodm_s": 0.003 + 1e-5 * abs(pos),
                "leakage": 1e-8, "status": "ok", "error": "",
            })
    path = _write_csv(tmp_path / "train.csv", rows)
    written = render(path, tmp_path)
    assert written == [str(tmp_path / "train_trajectory.png")]
    _assert_png(written[0])


def test_render_trace_table(tmp_path):
    rows = [{"seed": 0, "outer": 1, "inner": i, "block": "gamma",
             "objective_s": 0.01 / (i + 1)} for i in range(5)]
    path = _write_csv(tmp_path / "run_trace.csv", rows)
    written = render(path, tmp_path)
    assert written == [str(tmp_path / "run_trace_convergence.png")]
    _assert_png(written[0])


def test_render_solve_with_trace_sidecar(tmp_path):
    # blank grid column and the adjacent *_trace.csv both get handled
    solve_rows = [{"experiment": "solve", "variant": "optimized",
                   "grid_value": "", "seed": s, "objective_s": 0.002 + 1e-4 * s,
                   "leakage": 1e-8, "status": "ok", "error": ""}
                  for s in range(3)]
    path = _write_csv(tmp_path / "run.csv", solve_rows)
    _write_csv(tmp_path / "run_trace.csv",
               [{"seed": 0, "outer": 1, "inner": i, "block": "beta",
                 "objective_s": 0.01 / (i + 1)} for i in range(4)])
    written = render(path, tmp_path)
    assert [p.rsplit("_", 1)[-1] for p in written] == \
        ["convergence.png", "objective.png"]
    for p in written:
        _assert_png(p)


def test_render_rejects_all_failed(tmp_path):
    rows = [{"experiment": "sweep_power", "variant": "optimized",
             "grid_value": 1.0, "seed": 0, "objective_s": "",
             "leakage": "", "status": "error", "error": "x"}]
    path = _write_csv(tmp_path / "bad.csv", rows)
    with pytest.raises(ConfigError):
        render(path, tmp_path)
