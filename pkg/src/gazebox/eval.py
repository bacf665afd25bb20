"""Cross-validated sweeps over window length, grid size, and learner.

Every (dims, window, grid, learner) cell is scored with 5-fold
cross-validation: mean accuracy for classification (all windows) and the
per-parameter mean absolute error, times 100, for regression (label-1
windows only, since label-0 windows carry no box). Folds are assigned at
the window level by default, shuffled and class-stratified; a by-recording
mode is available for leakage-free analysis. All randomness derives from
the sweep seed plus the cell key, so results are bit-identical per seed.
"""

from __future__ import annotations

import csv
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import learners
from .gaze_data import merge_bounds
from .heatmap import GridSpec, features_for_windows
from .windowing import WindowSpec, sliced_labeled_windows

DEFAULT_WINDOW_LENGTHS_MS = (100, 200, 300, 400, 500)
DEFAULT_GRID_SIZES = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)

_active_sweeps = 0
_active_lock = threading.Lock()


def sweep_in_progress() -> bool:
    """True while any run_sweep call is executing (the benchmark harness
    refuses to time predictions while a sweep is loading the machine)."""
    return _active_sweeps > 0


@dataclass(frozen=True)
class FoldPlan:
    """A partition of n samples into k folds."""

    k: int
    assignment: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def kfold_split(n: int, k: int, seed: int) -> FoldPlan:
    """Shuffled balanced partition; fold sizes differ by at most one."""
    if n < k:
        raise ValueError(f"cannot split n={n} samples into k={k} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    pos = 0
    for fold, size in enumerate(sizes):
        assignment[order[pos : pos + size]] = fold
        pos += size
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Class-stratified variant; per-class and total sizes stay balanced."""
    labels = np.asarray(labels)
    n = len(labels)
    if n < k:
        raise ValueError(f"cannot split n={n} samples into k={k} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    counter = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for i in idx:
            assignment[i] = counter % k
            counter += 1
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def grouped_kfold(groups, k: int, seed: int) -> FoldPlan:
    """Folds that respect group (recording) boundaries.

    Fold sizes follow the group sizes, so the differ-by-one balance of the
    window-level splits does not hold here.
    """
    groups = np.asarray(groups)
    unique = np.unique(groups)
    if len(unique) < k:
        raise ValueError(f"need at least k={k} groups, got {len(unique)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(unique))
    group_fold = {unique[g]: i % k for i, g in enumerate(order)}
    assignment = np.array([group_fold[g] for g in groups], dtype=np.int64)
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {labels.shape}")
    if preds.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    return float((preds == labels).mean())


def mae_normalized(preds, targets) -> np.ndarray:
    """Per-parameter mean absolute error, times 100.

    Inputs are fractions of the stimulus resolution, so a reported value v
    is roughly v*10 pixels at the 1088x1080 scene resolution.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.ndim != 2 or preds.shape[1] != 4:
        raise ValueError(f"expected matching (n, 4) arrays, got {preds.shape}/{targets.shape}")
    if preds.size == 0:
        raise ValueError("error of an empty prediction set is undefined")
    eps = 1e-9
    if (preds < -eps).any() or (preds > 1 + eps).any() or (targets < -eps).any() or (
        targets > 1 + eps
    ).any():
        raise ValueError("normalized boxes must lie in [0, 1]")
    return np.abs(preds - targets).mean(axis=0) * 100.0


@dataclass(frozen=True)
class SweepConfig:
    window_lengths_ms: tuple = DEFAULT_WINDOW_LENGTHS_MS
    grid_sizes: tuple = DEFAULT_GRID_SIZES
    dims: tuple = ("2d", "3d")
    learner_names: tuple = ("knn", "bagged_trees", "svm", "gp")
    task: str = "classify"
    folds: int = 5
    seed: int = 0
    fold_mode: str = "window"  # "window" or "recording"
    subsample_cap: int = 3000
    scene_hz: float = 30.0
    hyper: dict = field(default_factory=dict)  # learner name -> overrides

    def __post_init__(self):
        for name, vals in (
            ("window_lengths_ms", self.window_lengths_ms),
            ("grid_sizes", self.grid_sizes),
            ("dims", self.dims),
            ("learner_names", self.learner_names),
        ):
            if len(vals) == 0:
                raise ValueError(f"{name} must be nonempty")
        if self.task not in ("classify", "regress"):
            raise ValueError(f"task must be 'classify' or 'regress', got {self.task!r}")
        if self.fold_mode not in ("window", "recording"):
            raise ValueError(f"fold_mode must be 'window' or 'recording', got {self.fold_mode!r}")
        if any(d not in ("2d", "3d") for d in self.dims):
            raise ValueError(f"dims entries must be '2d' or '3d', got {self.dims}")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")

    @property
    def active_learners(self) -> tuple:
        return tuple(n for n in self.learner_names if learners.supports(n, self.task))


@dataclass(frozen=True)
class CellResult:
    task: str
    dims: str
    learner: str
    window_ms: float
    grid: int
    status: str  # "ok", "skipped", or "failed"
    reason: str = ""
    metric_names: tuple = ()
    fold_values: tuple = ()  # one tuple of metric values per fold
    means: tuple = ()
    stds: tuple = ()
    n_windows: int = 0
    subsampled_to: int | None = None

    @property
    def key(self):
        return (self.task, self.dims, self.window_ms, self.grid, self.learner)


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    cells: tuple

    def cell(self, dims, window_ms, grid, learner) -> CellResult:
        for c in self.cells:
            if (c.dims, c.window_ms, c.grid, c.learner) == (dims, window_ms, grid, learner):
                return c
        raise KeyError((dims, window_ms, grid, learner))


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _collect_windows(recordings, window_ms: float, scene_hz: float):
    windows = []
    rec_idx = []
    for i, rec in enumerate(recordings):
        wins, _ = sliced_labeled_windows(rec, WindowSpec(window_ms), scene_hz=scene_hz)
        windows.extend(wins)
        rec_idx.extend([i] * len(wins))
    labels = np.array([w.label for w in windows], dtype=np.int64)
    return windows, labels, np.array(rec_idx, dtype=np.int64)


def _fit_and_score(cfg, cell_seed, learner, x, y, plan):
    fold_values = []
    subsampled_to = None
    for fold in range(plan.k):
        train = plan.train_indices(fold)
        test = plan.test_indices(fold)
        if learner in learners.KERNEL_LEARNERS and len(train) > cfg.subsample_cap:
            rng = np.random.default_rng(_derived_seed(cell_seed, fold))
            train = np.sort(rng.choice(train, size=cfg.subsample_cap, replace=False))
            subsampled_to = cfg.subsample_cap
        data = learners.Dataset(x[train], y[train])
        model = learners.fit_learner(
            learner, data, seed=_derived_seed(cell_seed, fold, 1), **cfg.hyper.get(learner, {})
        )
        preds = model.predict(x[test])
        if cfg.task == "classify":
            fold_values.append((accuracy(preds, y[test]),))
        else:
            preds = np.clip(preds, 0.0, 1.0)  # box targets live in the unit square
            fold_values.append(tuple(float(v) for v in mae_normalized(preds, y[test])))
    return fold_values, subsampled_to


def _run_group(recordings_bundle, cfg: SweepConfig, dims: str, window_ms: float, grid: int):
    windows, labels, rec_idx, bounds = recordings_bundle[window_ms]
    metric_names = ("accuracy",) if cfg.task == "classify" else ("mae_x", "mae_y", "mae_w", "mae_h")
    base = dict(task=cfg.task, dims=dims, window_ms=window_ms, grid=grid)

    if cfg.task == "classify":
        use = np.arange(len(windows))
        y = labels
    else:
        use = np.flatnonzero(labels == 1)
        y = np.vstack([windows[i].target.as_array() for i in use]) if len(use) else np.empty((0, 4))

    cells = []
    n = len(use)
    if n < cfg.folds:
        for learner in cfg.active_learners:
            cells.append(
                CellResult(
                    learner=learner,
                    status="skipped",
                    reason=f"n_windows={n}<k={cfg.folds}",
                    metric_names=metric_names,
                    n_windows=n,
                    **base,
                )
            )
        return cells

    spec = GridSpec.square(grid, bounds, dims)
    x = features_for_windows([windows[i] for i in use], spec)

    dims_code = 2 if dims == "2d" else 3
    fold_seed = _derived_seed(cfg.seed, int(window_ms * 1000), grid, dims_code)
    if cfg.fold_mode == "recording":
        plan = grouped_kfold(rec_idx[use], cfg.folds, fold_seed)
    elif cfg.task == "classify":
        plan = stratified_kfold(y, cfg.folds, fold_seed)
    else:
        plan = kfold_split(n, cfg.folds, fold_seed)

    for li, learner in enumerate(cfg.active_learners):
        cell_seed = _derived_seed(cfg.seed, int(window_ms * 1000), grid, dims_code, li)
        try:
            fold_values, subsampled_to = _fit_and_score(cfg, cell_seed, learner, x, y, plan)
        except (ValueError, np.linalg.LinAlgError) as exc:
            cells.append(
                CellResult(
                    learner=learner,
                    status="failed",
                    reason=str(exc),
                    metric_names=metric_names,
                    n_windows=n,
                    **base,
                )
            )
            continue
        arr = np.asarray(fold_values, dtype=np.float64)
        cells.append(
            CellResult(
                learner=learner,
                status="ok",
                metric_names=metric_names,
                fold_values=tuple(map(tuple, fold_values)),
                means=tuple(float(v) for v in arr.mean(axis=0)),
                stds=tuple(float(v) for v in arr.std(axis=0)),
                n_windows=n,
                subsampled_to=subsampled_to,
                **base,
            )
        )
    return cells


def run_sweep(recordings, cfg: SweepConfig, workers: int = 1) -> SweepResult:
    """Evaluate every (dims, window, grid, learner) cell of the sweep.

    Feature groups (one per dims/window/grid triple) run as independent
    jobs; results merge in cell-key order regardless of scheduling.
    """
    if not recordings:
        raise ValueError("run_sweep needs at least one recording")
    global _active_sweeps
    with _active_lock:
        _active_sweeps += 1
    try:
        bounds = merge_bounds(recordings)
        bundle = {}
        for window_ms in cfg.window_lengths_ms:
            windows, labels, rec_idx = _collect_windows(recordings, window_ms, cfg.scene_hz)
            bundle[window_ms] = (windows, labels, rec_idx, bounds)

        jobs = [
            (dims, window_ms, grid)
            for dims in cfg.dims
            for window_ms in cfg.window_lengths_ms
            for grid in cfg.grid_sizes
        ]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                groups = list(
                    pool.map(lambda j: _run_group(bundle, cfg, *j), jobs)
                )
        else:
            groups = [_run_group(bundle, cfg, *job) for job in jobs]
        cells = sorted((c for group in groups for c in group), key=lambda c: c.key)
        return SweepResult(config=cfg, cells=tuple(cells))
    finally:
        with _active_lock:
            _active_sweeps -= 1


def write_results_csv(path, sweep: SweepResult) -> None:
    """Long-format per-fold metrics for the cells that ran."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dims", "learner", "window_ms", "grid", "fold", "metric", "value"])
        for c in sweep.cells:
            if c.status != "ok":
                continue
            for fold, values in enumerate(c.fold_values):
                for name, value in zip(c.metric_names, values):
                    writer.writerow(
                        [c.dims, c.learner, fmt_num(c.window_ms), c.grid, fold, name, repr(value)]
                    )


def write_summary_csv(path, sweep: SweepResult) -> None:
    """Pivoted means: one row per (dims, learner, grid), windows as columns."""
    cfg = sweep.config
    metric_names = ("accuracy",) if cfg.task == "classify" else ("mae_x", "mae_y", "mae_w", "mae_h")
    cols = ["dims", "learner", "grid"]
    for window_ms in cfg.window_lengths_ms:
        for m in metric_names:
            cols.append(f"{m}_w{fmt_num(window_ms)}")
    cols.append("notes")
    by_key = {c.key: c for c in sweep.cells}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for dims in cfg.dims:
            for learner in cfg.active_learners:
                for grid in cfg.grid_sizes:
                    row = [dims, learner, grid]
                    notes = []
                    for window_ms in cfg.window_lengths_ms:
                        c = by_key.get((cfg.task, dims, window_ms, grid, learner))
                        if c is None or c.status != "ok":
                            row.extend([""] * len(metric_names))
                            if c is not None:
                                notes.append(f"w{fmt_num(window_ms)}:{c.status}:{c.reason}")
                        else:
                            row.extend(f"{v:.6f}" for v in c.means)
                            if c.subsampled_to is not None:
                                notes.append(f"w{fmt_num(window_ms)}:subsampled={c.subsampled_to}")
                    row.append("; ".join(notes))
                    writer.writerow(row)


def fmt_num(v) -> str:
    """Render 100.0 as '100' but keep genuine fractions."""
    return str(int(v)) if float(v) == int(v) else repr(float(v))
