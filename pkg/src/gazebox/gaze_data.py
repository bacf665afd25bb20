"""Core gaze data model and dataset ingestion.

A recording pairs a 200 Hz stream of 3D gaze points (scene-camera pixel
coordinates plus depth) with 30 fps bounding-box annotations of the object
the subject was looking at. File layouts are data-driven through column
maps so the default profile can be adapted without code changes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

DEFAULT_R_X = 1088.0  # scene camera horizontal resolution, pixels
DEFAULT_R_Y = 1080.0  # scene camera vertical resolution, pixels
DEFAULT_SCENE_HZ = 30.0
DEFAULT_EYE_HZ = 200.0


class DataError(Exception):
    """An input file is missing, malformed, or yields no usable rows."""


@dataclass(frozen=True)
class StimulusBounds:
    """Maximum stimulus extent per axis: x/y in pixels, z (depth) in meters."""

    r_x: float = DEFAULT_R_X
    r_y: float = DEFAULT_R_Y
    r_z: float = 5.0

    def __post_init__(self):
        if not (self.r_x > 0 and self.r_y > 0 and self.r_z > 0):
            raise ValueError(f"stimulus bounds must be strictly positive, got {self}")


@dataclass(frozen=True)
class GazeSample:
    """One timestamped gaze point.

    `t` is microseconds since recording start; `p_x`/`p_y` are pixels,
    `p_z` is depth in meters. `source_tag` identifies the upstream
    estimation method that produced the point (informational only).
    """

    t: float
    p_x: float
    p_y: float
    p_z: float
    source_tag: int = 0


@dataclass(frozen=True)
class BoxAnnotation:
    """A scene-frame-indexed bounding box (30 fps frames, pixel units)."""

    frame_idx: int
    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class Recording:
    """An immutable, validated recording: sorted samples plus annotations."""

    id: str
    samples: tuple[GazeSample, ...]
    annotations: tuple[BoxAnnotation, ...]
    bounds: StimulusBounds


@dataclass(frozen=True)
class ColumnMap:
    """Column names of a gaze CSV. The defaults match the shipped profile."""

    t: str = "t_us"
    x: str = "x_px"
    y: str = "y_px"
    z: str = "z_m"
    source: str | None = "method"


@dataclass(frozen=True)
class BoxColumnMap:
    """Column names of an annotation CSV."""

    frame: str = "frame"
    x: str = "x"
    y: str = "y"
    w: str = "w"
    h: str = "h"


@dataclass(frozen=True)
class GazeParseResult:
    samples: tuple[GazeSample, ...]
    n_rows: int
    n_dropped: int
    bounds: StimulusBounds

    @property
    def n_kept(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class BoxParseResult:
    annotations: tuple[BoxAnnotation, ...]
    n_rows: int
    n_dropped: int

    @property
    def n_kept(self) -> int:
        return len(self.annotations)


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def _open_rows(path, required: list[str]):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: column(s) {missing} not found in header {header}")
        yield from reader


def parse_gaze(
    path,
    schema: ColumnMap = ColumnMap(),
    bounds: StimulusBounds | None = None,
    *,
    default_r_x: float = DEFAULT_R_X,
    default_r_y: float = DEFAULT_R_Y,
) -> GazeParseResult:
    """Read a gaze CSV into clamped, time-sorted samples.

    Rows with non-finite or unparseable coordinates, negative timestamps,
    or duplicate timestamps are dropped and counted. When `bounds` is None
    the x/y extent falls back to the scene camera resolution and the depth
    bound is the maximum finite depth observed in the file (the upstream
    gaze software's depth ceiling is not published, so it is data-driven
    unless configured).
    """
    required = [schema.t, schema.x, schema.y, schema.z]
    raw: list[tuple[float, float, float, float, int]] = []
    n_rows = 0
    n_dropped = 0
    for row in _open_rows(path, required):
        n_rows += 1
        try:
            t = float(row[schema.t])
            x = float(row[schema.x])
            y = float(row[schema.y])
            z = float(row[schema.z])
            tag = 0
            if schema.source and row.get(schema.source) not in (None, ""):
                tag = int(float(row[schema.source]))
        except (TypeError, ValueError):
            n_dropped += 1
            continue
        if not all(map(math.isfinite, (t, x, y, z))) or t < 0:
            n_dropped += 1
            continue
        raw.append((t, x, y, z, tag))

    if bounds is None:
        max_z = max((r[3] for r in raw if r[3] > 0), default=1.0)
        bounds = StimulusBounds(default_r_x, default_r_y, max_z)

    raw.sort(key=lambda r: r[0])
    samples: list[GazeSample] = []
    prev_t = None
    for t, x, y, z, tag in raw:
        if t == prev_t:
            n_dropped += 1
            continue
        prev_t = t
        samples.append(
            GazeSample(
                t=t,
                p_x=_clamp(x, 0.0, bounds.r_x),
                p_y=_clamp(y, 0.0, bounds.r_y),
                p_z=_clamp(z, 0.0, bounds.r_z),
                source_tag=tag,
            )
        )
    if not samples:
        raise DataError(f"{path}: no valid gaze rows (of {n_rows} read)")
    return GazeParseResult(tuple(samples), n_rows, n_dropped, bounds)


def parse_annotations(
    path,
    schema: BoxColumnMap = BoxColumnMap(),
    bounds: StimulusBounds | None = None,
) -> BoxParseResult:
    """Read an annotation CSV into frame-sorted boxes.

    Degenerate boxes (w<=0 or h<=0) are dropped and counted; anything
    unparseable raises, since annotations are hand-made labels.
    """
    if bounds is None:
        bounds = StimulusBounds(DEFAULT_R_X, DEFAULT_R_Y, 1.0)
    required = [schema.frame, schema.x, schema.y, schema.w, schema.h]
    boxes: list[BoxAnnotation] = []
    n_rows = 0
    n_dropped = 0
    for row in _open_rows(path, required):
        n_rows += 1
        try:
            frame = int(float(row[schema.frame]))
            x = float(row[schema.x])
            y = float(row[schema.y])
            w = float(row[schema.w])
            h = float(row[schema.h])
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed annotation row {n_rows}: {exc}") from exc
        if frame < 0 or not all(map(math.isfinite, (x, y, w, h))):
            raise DataError(f"{path}: malformed annotation row {n_rows}: {row}")
        if w <= 0 or h <= 0:
            n_dropped += 1
            continue
        w = min(w, bounds.r_x)
        h = min(h, bounds.r_y)
        boxes.append(
            BoxAnnotation(
                frame_idx=frame,
                x=_clamp(x, 0.0, bounds.r_x - w),
                y=_clamp(y, 0.0, bounds.r_y - h),
                w=w,
                h=h,
            )
        )
    boxes.sort(key=lambda b: b.frame_idx)
    return BoxParseResult(tuple(boxes), n_rows, n_dropped)


def join_recording(samples, annotations, bounds: StimulusBounds, id: str) -> Recording:
    """Assemble a Recording, sorting inputs and enforcing the invariants."""
    samples = sorted(samples, key=lambda s: s.t)
    if not samples:
        raise DataError(f"recording {id!r}: empty sample list")
    for a, b in zip(samples, samples[1:]):
        if b.t <= a.t:
            raise DataError(f"recording {id!r}: duplicate sample timestamp t={b.t}")
    annotations = sorted(annotations, key=lambda a: a.frame_idx)
    return Recording(
        id=id,
        samples=tuple(samples),
        annotations=tuple(annotations),
        bounds=bounds,
    )


def write_gaze_csv(path, samples, schema: ColumnMap = ColumnMap()) -> None:
    cols = [schema.t, schema.x, schema.y, schema.z]
    if schema.source:
        cols.append(schema.source)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for s in samples:
            row = [repr(s.t), repr(s.p_x), repr(s.p_y), repr(s.p_z)]
            if schema.source:
                row.append(str(s.source_tag))
            writer.writerow(row)


def write_annotations_csv(path, annotations, schema: BoxColumnMap = BoxColumnMap()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema.frame, schema.x, schema.y, schema.w, schema.h])
        for b in annotations:
            writer.writerow([b.frame_idx, repr(b.x), repr(b.y), repr(b.w), repr(b.h)])


def load_recording(
    gaze_path,
    boxes_path,
    id: str,
    gaze_schema: ColumnMap = ColumnMap(),
    box_schema: BoxColumnMap = BoxColumnMap(),
    bounds: StimulusBounds | None = None,
    *,
    default_r_x: float = DEFAULT_R_X,
    default_r_y: float = DEFAULT_R_Y,
) -> tuple[Recording, GazeParseResult, BoxParseResult]:
    """Parse one gaze/annotation file pair and join it into a Recording."""
    gaze = parse_gaze(
        gaze_path, gaze_schema, bounds, default_r_x=default_r_x, default_r_y=default_r_y
    )
    anns = parse_annotations(boxes_path, box_schema, gaze.bounds)
    rec = join_recording(gaze.samples, anns.annotations, gaze.bounds, id)
    return rec, gaze, anns


def merge_bounds(recordings) -> StimulusBounds:
    """One bounds covering every recording (elementwise maximum).

    Cross-recording features must share a grid, so heatmaps are built
    against a single global extent the way the original single-constant
    resolution bounds were.
    """
    recordings = list(recordings)
    if not recordings:
        raise ValueError("merge_bounds needs at least one recording")
    return StimulusBounds(
        r_x=max(r.bounds.r_x for r in recordings),
        r_y=max(r.bounds.r_y for r in recordings),
        r_z=max(r.bounds.r_z for r in recordings),
    )


GAZE_SUFFIX = ".gaze.csv"
BOXES_SUFFIX = ".boxes.csv"


def discover_recordings(directory) -> list[tuple[str, Path, Path]]:
    """Find `<id>.gaze.csv` / `<id>.boxes.csv` pairs under a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"dataset directory not found: {directory}")
    pairs = []
    for gaze_path in sorted(directory.glob(f"*{GAZE_SUFFIX}")):
        rec_id = gaze_path.name[: -len(GAZE_SUFFIX)]
        boxes_path = directory / f"{rec_id}{BOXES_SUFFIX}"
        if not boxes_path.is_file():
            raise DataError(f"missing annotation file for {rec_id!r}: {boxes_path}")
        pairs.append((rec_id, gaze_path, boxes_path))
    if not pairs:
        raise DataError(f"no *{GAZE_SUFFIX} files under {directory}")
    return pairs
