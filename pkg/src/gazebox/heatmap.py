"""Spatial gaze distributions over a time window.

Each gaze point is binned into a G_x x G_y x G_z grid by normalizing its
coordinate against the stimulus bounds, scaling by the cell count, and
rounding to the nearest integer (half away from zero). The counts grid is
then divided by its total so it forms a distribution, and the flattened
grid is the feature vector fed to the learners. G_z = 1 selects the 2D
variant: every sample lands in the single depth cell.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gaze_data import DataError, StimulusBounds

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Cell counts per axis plus the stimulus bounds they partition."""

    g_x: int
    g_y: int
    g_z: int
    bounds: StimulusBounds

    def __post_init__(self):
        if min(self.g_x, self.g_y, self.g_z) < 1:
            raise ValueError(f"grid cell counts must be >= 1, got {self}")

    @property
    def n_cells(self) -> int:
        return self.g_x * self.g_y * self.g_z

    @property
    def dims(self) -> str:
        return "2d" if self.g_z == 1 else "3d"

    @classmethod
    def square(cls, g: int, bounds: StimulusBounds, dims: str = "2d") -> "GridSpec":
        """The sweep convention: g cells per axis, depth collapsed for 2D."""
        if dims not in ("2d", "3d"):
            raise ValueError(f"dims must be '2d' or '3d', got {dims!r}")
        return cls(g, g, g if dims == "3d" else 1, bounds)


@dataclass(frozen=True)
class Heatmap:
    """A (g_x, g_y, g_z) grid of nonnegative reals, optionally normalized."""

    grid: np.ndarray
    spec: GridSpec
    normalized: bool

    @property
    def total(self) -> float:
        return float(self.grid.sum())


X_MAJOR_LAYOUT = "x-major: index = (ix * g_y + iy) * g_z + iz"


@dataclass(frozen=True)
class FeatureVector:
    """Flattened normalized heatmap.

    The only supported layout is x-major, so a 2x2 2D grid
    [[a, b], [c, d]] flattens to [a, b, c, d].
    """

    values: np.ndarray
    spec: GridSpec
    layout: str = X_MAJOR_LAYOUT


def bin_index(p: float, r: float, g: int) -> int:
    """Map a coordinate in [0, r] to a zero-based cell index in [0, g-1].

    Rounds p/r*g half away from zero, then clamps the topmost value
    (p == r rounds to g) into the last cell.
    """
    if r <= 0:
        raise ValueError(f"axis maximum must be positive, got {r}")
    if g < 1:
        raise ValueError(f"cell count must be >= 1, got {g}")
    # floor(x + 0.5) is round-half-away-from-zero for the nonnegative x here
    idx = math.floor(p / r * g + 0.5)
    return 0 if idx < 0 else g - 1 if idx > g - 1 else idx


def _bin_axis(values: np.ndarray, r: float, g: int) -> np.ndarray:
    idx = np.floor(values / r * g + 0.5).astype(np.int64)
    return np.clip(idx, 0, g - 1)


def _sample_coords(samples) -> np.ndarray:
    out = np.empty((len(samples), 3), dtype=np.float64)
    for i, s in enumerate(samples):
        out[i, 0] = s.p_x
        out[i, 1] = s.p_y
        out[i, 2] = s.p_z
    return out


def _flat_indices(coords: np.ndarray, spec: GridSpec) -> np.ndarray:
    b = spec.bounds
    ix = _bin_axis(coords[:, 0], b.r_x, spec.g_x)
    iy = _bin_axis(coords[:, 1], b.r_y, spec.g_y)
    if spec.g_z == 1:
        iz = 0
    else:
        iz = _bin_axis(coords[:, 2], b.r_z, spec.g_z)
    return (ix * spec.g_y + iy) * spec.g_z + iz


def build_heatmap(samples, spec: GridSpec) -> Heatmap:
    """Bin samples into an unnormalized counts grid (total == len(samples))."""
    if len(samples) == 0:
        raise ValueError("cannot build a heatmap from zero samples")
    flat = _flat_indices(_sample_coords(samples), spec)
    counts = np.bincount(flat, minlength=spec.n_cells).astype(np.float64)
    return Heatmap(counts.reshape(spec.g_x, spec.g_y, spec.g_z), spec, normalized=False)


def normalize(h: Heatmap) -> Heatmap:
    """Divide every cell by the grand total so the grid sums to one."""
    total = h.grid.sum()
    if total <= 0:
        raise ValueError("cannot normalize an all-zero heatmap")
    return Heatmap(h.grid / total, h.spec, normalized=True)


def flatten(h: Heatmap) -> FeatureVector:
    """Linearize a normalized heatmap in the documented x-major order."""
    if not h.normalized:
        raise ValueError("flatten expects a normalized heatmap")
    return FeatureVector(h.grid.reshape(-1).copy(), h.spec)


def unflatten(fv: FeatureVector) -> Heatmap:
    """Inverse of flatten; together they form a bijection."""
    spec = fv.spec
    grid = np.asarray(fv.values, dtype=np.float64).reshape(spec.g_x, spec.g_y, spec.g_z)
    return Heatmap(grid, spec, normalized=True)


def features_for_windows(windows, spec: GridSpec) -> np.ndarray:
    """Stack the normalized flattened heatmaps of many windows into (n, d).

    Fast path for sweeps; row i equals
    flatten(normalize(build_heatmap(windows[i].samples, spec))).
    """
    n = len(windows)
    out = np.empty((n, spec.n_cells), dtype=np.float64)
    for i, win in enumerate(windows):
        flat = _flat_indices(_sample_coords(win.samples), spec)
        counts = np.bincount(flat, minlength=spec.n_cells)
        out[i] = counts / counts.sum()
    return out


# --------------------------------------------------------------------------
# Feature file: binary, little-endian.
#   header: magic b"GZF1", u32 g_x, u32 g_y, u32 g_z, u32 count
#   record: u8 label, 4 x f32 target (all NaN when absent), f32 x n_cells
# --------------------------------------------------------------------------

FEATURE_MAGIC = b"GZF1"
_HEADER = struct.Struct("<4sIIII")
TARGET_SENTINEL = float("nan")


def write_feature_file(path, grid_shape, labels, targets, features) -> None:
    """Serialize labeled feature rows; features are stored as 32-bit floats.

    `targets` is an (n, 4) array where label-0 rows are NaN.
    """
    g_x, g_y, g_z = (int(v) for v in grid_shape)
    features = np.ascontiguousarray(features, dtype=np.float32)
    targets = np.ascontiguousarray(targets, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.uint8)
    n, d = features.shape
    if d != g_x * g_y * g_z:
        raise ValueError(f"feature width {d} != grid volume {g_x * g_y * g_z}")
    if labels.shape != (n,) or targets.shape != (n, 4):
        raise ValueError("labels/targets shapes do not match feature count")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEATURE_MAGIC, g_x, g_y, g_z, n))
        for i in range(n):
            fh.write(labels[i].tobytes())
            fh.write(targets[i].tobytes())
            fh.write(features[i].tobytes())


def read_feature_file(path):
    """Read a feature file back as (grid_shape, labels, targets, features).

    Features and targets come back as float64 (the in-memory convention).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated feature file header")
    magic, g_x, g_y, g_z, n = _HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    d = g_x * g_y * g_z
    rec_size = 1 + 4 * 4 + 4 * d
    expected = _HEADER.size + n * rec_size
    if len(blob) != expected:
        raise DataError(f"{path}: size {len(blob)} != expected {expected}")
    labels = np.empty(n, dtype=np.uint8)
    targets = np.empty((n, 4), dtype=np.float64)
    features = np.empty((n, d), dtype=np.float64)
    off = _HEADER.size
    for i in range(n):
        labels[i] = blob[off]
        targets[i] = np.frombuffer(blob, dtype="<f4", count=4, offset=off + 1)
        features[i] = np.frombuffer(blob, dtype="<f4", count=d, offset=off + 17)
        off += rec_size
    return (g_x, g_y, g_z), labels, targets, features


def write_features_csv(path, grid_shape, labels, targets, features) -> None:
    """Human-readable emitter for debugging small feature sets."""
    g_x, g_y, g_z = grid_shape
    features = np.asarray(features)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# grid {g_x}x{g_y}x{g_z}\n")
        cols = ["label", "x", "y", "w", "h"] + [f"c{i}" for i in range(features.shape[1])]
        fh.write(",".join(cols) + "\n")
        for i in range(features.shape[0]):
            tgt = ["" if np.isnan(v) else repr(float(v)) for v in np.asarray(targets)[i]]
            row = [str(int(labels[i]))] + tgt + [repr(float(v)) for v in features[i]]
            fh.write(",".join(row) + "\n")
