"""Render sweep and benchmark CSVs into figures plus pivot tables.

The classification view mirrors the sweep layout: one panel per
(dims, learner) with grid size on the y axis, window length on the x
axis, and mean accuracy as the cell color. Regression gets a 2x2 panel
per (dims, learner), one per box parameter. Every figure is written next
to a pivot CSV carrying the same numbers.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .gaze_data import DataError

_REG_METRICS = ("mae_x", "mae_y", "mae_w", "mae_h")


def read_results_csv(path) -> dict:
    """Load the long-format sweep CSV into {key: [fold values]}."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"results file not found: {path}")
    cells = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = {"dims", "learner", "window_ms", "grid", "fold", "metric", "value"}
        if not needed.issubset(reader.fieldnames or ()):
            raise DataError(f"{path}: not a sweep results CSV (header {reader.fieldnames})")
        for row in reader:
            key = (row["dims"], row["learner"], float(row["window_ms"]), int(row["grid"]), row["metric"])
            cells[key].append(float(row["value"]))
    if not cells:
        raise DataError(f"{path}: no result rows")
    return dict(cells)


def _axes(cells) -> tuple[list, list, list, list, list]:
    dims = sorted({k[0] for k in cells})
    learners = sorted({k[1] for k in cells})
    windows = sorted({k[2] for k in cells})
    grids = sorted({k[3] for k in cells})
    metrics = sorted({k[4] for k in cells})
    return dims, learners, windows, grids, metrics


def _pivot(cells, dims, learner, metric, windows, grids) -> np.ndarray:
    table = np.full((len(grids), len(windows)), np.nan)
    for gi, grid in enumerate(grids):
        for wi, window in enumerate(windows):
            values = cells.get((dims, learner, window, grid, metric))
            if values:
                table[gi, wi] = float(np.mean(values))
    return table


def _write_pivot_csv(path, table, windows, grids, metric) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid"] + [f"{metric}_w{int(w) if w == int(w) else w}" for w in windows])
        for gi, grid in enumerate(grids):
            writer.writerow(
                [grid] + ["" if np.isnan(v) else f"{v:.6f}" for v in table[gi]]
            )


def _draw_panel(ax, table, windows, grids, title, cmap, fmt):
    masked = np.ma.masked_invalid(table)
    im = ax.imshow(masked, aspect="auto", cmap=cmap, origin="upper")
    ax.set_xticks(range(len(windows)), [f"{w:g}" for w in windows])
    ax.set_yticks(range(len(grids)), [str(g) for g in grids])
    ax.set_xlabel("window length [ms]")
    ax.set_ylabel("grid cells")
    ax.set_title(title)
    if table.size <= 150:  # annotate only while readable
        for gi in range(len(grids)):
            for wi in range(len(windows)):
                if not np.isnan(table[gi, wi]):
                    ax.text(wi, gi, fmt(table[gi, wi]), ha="center", va="center", fontsize=7)
    return im


def render_sweep_report(results_csv, out_dir) -> list[Path]:
    """Figures + pivot CSVs for one sweep results file."""
    cells = read_results_csv(results_csv)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dims_list, learner_list, windows, grids, metrics = _axes(cells)
    written: list[Path] = []

    classify = "accuracy" in metrics
    for dims in dims_list:
        for learner in learner_list:
            if classify:
                table = _pivot(cells, dims, learner, "accuracy", windows, grids)
                if np.isnan(table).all():
                    continue
                fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(windows), 0.8 + 0.45 * len(grids)))
                im = _draw_panel(
                    ax, table, windows, grids,
                    f"accuracy, {dims} heatmap, {learner}", "viridis", lambda v: f"{v:.2f}",
                )
                fig.colorbar(im, ax=ax, shrink=0.85)
                stem = out_dir / f"classification_{dims}_{learner}"
            else:
                tables = {
                    m: _pivot(cells, dims, learner, m, windows, grids) for m in _REG_METRICS
                }
                if all(np.isnan(t).all() for t in tables.values()):
                    continue
                fig, axes = plt.subplots(
                    2, 2, figsize=(2.0 + 1.8 * len(windows), 1.6 + 0.9 * len(grids))
                )
                for ax, m in zip(axes.ravel(), _REG_METRICS):
                    im = _draw_panel(
                        ax, tables[m], windows, grids,
                        f"{m} (x100), {dims}, {learner}", "viridis_r", lambda v: f"{v:.1f}",
                    )
                    fig.colorbar(im, ax=ax, shrink=0.85)
                stem = out_dir / f"regression_{dims}_{learner}"
            fig.tight_layout()
            fig.savefig(stem.with_suffix(".png"), dpi=150)
            plt.close(fig)
            written.append(stem.with_suffix(".png"))
            if classify:
                _write_pivot_csv(
                    stem.with_suffix(".csv"),
                    _pivot(cells, dims, learner, "accuracy", windows, grids),
                    windows, grids, "accuracy",
                )
                written.append(stem.with_suffix(".csv"))
            else:
                for m in _REG_METRICS:
                    p = out_dir / f"regression_{dims}_{learner}_{m}.csv"
                    _write_pivot_csv(p, _pivot(cells, dims, learner, m, windows, grids), windows, grids, m)
                    written.append(p)
    if not written:
        raise DataError(f"{results_csv}: nothing to plot")
    return written


def render_bench_report(bench_csv, out_dir) -> list[Path]:
    """Time and memory scaling figures from a benchmark CSV."""
    bench_csv = Path(bench_csv)
    if not bench_csv.is_file():
        raise DataError(f"bench file not found: {bench_csv}")
    rows = []
    with open(bench_csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    if not rows:
        raise DataError(f"{bench_csv}: no benchmark rows")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    series = defaultdict(list)  # (learner, dims) -> [(grid, time, mem_kb)]
    for row in rows:
        mem_kb = (int(row["input_feature_bytes"]) + int(row["transient_peak_bytes"])) / 1024
        series[(row["learner"], row["dims"])].append(
            (int(row["grid"]), float(row["total_time_s"]), mem_kb)
        )

    written = []
    for kind, idx, ylabel, name in (
        ("time", 1, "time for n predictions [s]", "bench_time"),
        ("memory", 2, "single-input memory [KB]", "bench_memory"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for (learner, dims), points in sorted(series.items()):
            points = sorted(points)
            ax.plot(
                [p[0] for p in points],
                [p[idx] for p in points],
                marker="o",
                label=f"{learner} ({dims})",
            )
        ax.set_xlabel("grid cells")
        ax.set_ylabel(ylabel)
        ax.set_yscale("log")
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"{name}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
