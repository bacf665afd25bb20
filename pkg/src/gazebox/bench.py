"""Prediction-cost measurements for the heatmap-side methods.

Timing follows the comparison protocol: wall time for 1000 single-input
predictions (batch size one), after one untimed warm-up pass, reporting
the median of three repetitions. Memory is the serialized size of one
input feature (32-bit floats) plus the transient allocation high-water
mark during one prediction, observed through tracemalloc. Absolute
numbers are machine-specific; orderings and scaling ratios are what the
reports are for.
"""

from __future__ import annotations

import csv
import os
import platform
import statistics
import time
import tracemalloc
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import eval as evaluation
from . import learners
from .gaze_data import merge_bounds
from .heatmap import GridSpec, features_for_windows
from .windowing import WindowSpec, slice_windows, sliced_labeled_windows

RECORD_FRAMING_BYTES = 17  # u8 label + 4 x f32 target per feature-file record

MEMORY_METHODOLOGY = (
    "input = n_cells * 4 bytes (32-bit serialized feature; record framing of "
    f"{RECORD_FRAMING_BYTES} bytes excluded); transient = tracemalloc peak minus "
    "baseline across one single-input prediction (model storage not included)"
)

TIME_METHODOLOGY = (
    "wall time of sequential single-input predictions after one untimed "
    "warm-up pass; median of the repetitions reported"
)


@dataclass(frozen=True)
class BenchReport:
    learner: str
    dims: str
    grid: int
    n_predictions: int
    total_time_s: float
    repeat_times_s: tuple
    input_feature_bytes: int
    transient_peak_bytes: int
    methodology: str
    environment: str
    empty: bool = False


def _environment() -> str:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo", encoding="utf-8") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{cpu}; {os.cpu_count()} cores; {platform.python_implementation()} {platform.python_version()}"


def _refuse_during_sweep():
    if evaluation.sweep_in_progress():
        raise RuntimeError("benchmarks must not run concurrently with sweep jobs")


@contextmanager
def _pinned_to_one_cpu():
    """Pin the process to a single CPU for the measurement, when supported."""
    if not hasattr(os, "sched_getaffinity"):
        yield False
        return
    try:
        original = os.sched_getaffinity(0)
        os.sched_setaffinity(0, {min(original)})
    except OSError:
        yield False
        return
    try:
        yield True
    finally:
        try:
            os.sched_setaffinity(0, original)
        except OSError:
            pass


def time_predictions(model, inputs: np.ndarray, repeats: int = 3) -> tuple[float, tuple]:
    """Median wall time over `repeats` of predicting each row singly."""
    _refuse_during_sweep()
    inputs = np.asarray(inputs, dtype=np.float64)
    if len(inputs) == 0:
        return 0.0, tuple(0.0 for _ in range(repeats))
    for row in inputs:  # warm-up, untimed
        model.predict(row)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        for row in inputs:
            model.predict(row)
        times.append(time.perf_counter() - start)
    return float(statistics.median(times)), tuple(times)


def measure_memory(model, x: np.ndarray) -> tuple[int, int]:
    """(serialized input feature bytes, transient peak bytes of one prediction)."""
    x = np.asarray(x, dtype=np.float64)
    input_bytes = 4 * x.shape[-1]
    model.predict(x)  # warm any lazy allocations before tracing
    tracemalloc.start()
    try:
        baseline, _ = tracemalloc.get_traced_memory()
        tracemalloc.reset_peak()
        model.predict(x)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return input_bytes, max(0, peak - baseline)


def _distinct_rows(features: np.ndarray) -> np.ndarray:
    _, idx = np.unique(features, axis=0, return_index=True)
    return features[np.sort(idx)]


def prepare_inputs(recordings, window_ms: float, spec: GridSpec, n: int) -> np.ndarray:
    """n distinct feature vectors drawn from the recordings' windows."""
    windows = []
    for rec in recordings:
        wins, _ = slice_windows(rec, WindowSpec(window_ms))
        windows.extend(wins)
    feats = _distinct_rows(features_for_windows(windows, spec))
    if len(feats) < n:
        raise ValueError(f"only {len(feats)} distinct windows available, need {n}")
    return feats[:n]


def run_bench(
    train_recordings,
    input_recordings,
    learner_names=("knn", "bagged_trees", "svm"),
    grids=(10, 50),
    dims_list=("2d",),
    window_ms: float = 250.0,
    n_predictions: int = 1000,
    repeats: int = 3,
    seed: int = 0,
    scene_hz: float = 30.0,
) -> list[BenchReport]:
    """Train each classifier per (dims, grid) and measure its prediction cost."""
    _refuse_during_sweep()
    bounds = merge_bounds(list(train_recordings) + list(input_recordings))

    train_windows = []
    for rec in train_recordings:
        wins, _ = sliced_labeled_windows(rec, WindowSpec(window_ms), scene_hz=scene_hz)
        train_windows.extend(wins)
    labels = np.array([w.label for w in train_windows], dtype=np.int64)

    reports = []
    with _pinned_to_one_cpu() as pinned:
        env = _environment() + ("; pinned to one CPU" if pinned else "")
        for dims in dims_list:
            for grid in grids:
                spec = GridSpec.square(grid, bounds, dims)
                x_train = features_for_windows(train_windows, spec)
                data = learners.Dataset(x_train, labels)
                inputs = (
                    prepare_inputs(input_recordings, window_ms, spec, n_predictions)
                    if n_predictions > 0
                    else np.empty((0, spec.n_cells))
                )
                for name in learner_names:
                    model = learners.fit_learner(name, data, seed=seed)
                    total, reps = time_predictions(model, inputs, repeats=repeats)
                    probe = inputs[0] if len(inputs) else x_train[0]
                    input_bytes, transient = measure_memory(model, probe)
                    reports.append(
                        BenchReport(
                            learner=name,
                            dims=dims,
                            grid=grid,
                            n_predictions=len(inputs),
                            total_time_s=total,
                            repeat_times_s=reps,
                            input_feature_bytes=input_bytes,
                            transient_peak_bytes=transient,
                            methodology=f"{TIME_METHODOLOGY}; {MEMORY_METHODOLOGY}",
                            environment=env,
                            empty=len(inputs) == 0,
                        )
                    )
    return reports


def write_bench_csv(path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "learner",
                "dims",
                "grid",
                "n_predictions",
                "total_time_s",
                "repeat_times_s",
                "input_feature_bytes",
                "transient_peak_bytes",
                "empty",
                "methodology",
                "environment",
            ]
        )
        for r in reports:
            writer.writerow(
                [
                    r.learner,
                    r.dims,
                    r.grid,
                    r.n_predictions,
                    repr(r.total_time_s),
                    ";".join(repr(t) for t in r.repeat_times_s),
                    r.input_feature_bytes,
                    r.transient_peak_bytes,
                    int(r.empty),
                    r.methodology,
                    r.environment,
                ]
            )


def format_bench_table(reports) -> str:
    """Aligned human-readable view of the reports."""
    header = ("learner", "dims", "grid", "preds", "time [s]", "input [KB]", "transient [KB]")
    rows = [header]
    for r in reports:
        rows.append(
            (
                r.learner,
                r.dims,
                str(r.grid),
                str(r.n_predictions),
                f"{r.total_time_s:.3f}",
                f"{r.input_feature_bytes / 1024:.1f}",
                f"{r.transient_peak_bytes / 1024:.1f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    if reports:
        lines.append("")
        lines.append(f"environment: {reports[0].environment}")
    return "\n".join(lines)
