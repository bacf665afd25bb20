"""Temporal windowing and window labeling.

A recording is cut into fixed-length windows of gaze samples. A window is
class 1 when at least one annotated scene frame falls inside it, and its
regression target is the box of the annotation closest in time to the
window center (the subject moves, so boxes drift within a window; the
most central one is the canonical target). Scene frames are mapped to
time through their 30 fps midpoints; all frame/time comparisons use exact
rational arithmetic so boundary and tie cases are deterministic.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gaze_data import DEFAULT_EYE_HZ, DEFAULT_SCENE_HZ, GazeSample, Recording

_US = 1_000_000


@dataclass(frozen=True)
class WindowSpec:
    """Window length and stride in milliseconds.

    Stride defaults to the window length (non-overlapping), which keeps
    cross-validation folds free of shared samples.
    """

    length_ms: float
    stride_ms: float | None = None

    def __post_init__(self):
        if self.stride_ms is None:
            object.__setattr__(self, "stride_ms", self.length_ms)
        if self.length_ms <= 0 or self.stride_ms <= 0:
            raise ValueError(f"window length and stride must be > 0, got {self}")

    @property
    def length_us(self) -> int:
        return int(round(self.length_ms * 1000))

    @property
    def stride_us(self) -> int:
        return int(round(self.stride_ms * 1000))


@dataclass(frozen=True)
class BoxTarget:
    """A box as fractions of the stimulus resolution, each in [0, 1]."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        eps = 1e-9
        vals = (self.x, self.y, self.w, self.h)
        if any(v < -eps or v > 1 + eps for v in vals):
            raise ValueError(f"normalized box components outside [0,1]: {self}")
        if self.x + self.w > 1 + eps or self.y + self.h > 1 + eps:
            raise ValueError(f"normalized box exceeds unit square: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


@dataclass(frozen=True)
class TimeWindow:
    """A [t_start, t_end) slice of samples, optionally labeled.

    label is None until label_window assigns it; a target exists exactly
    when label == 1.
    """

    t_start: int
    t_end: int
    samples: tuple[GazeSample, ...]
    label: int | None = None
    target: BoxTarget | None = None

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError(f"window end must exceed start: {self}")
        if self.label not in (None, 0, 1):
            raise ValueError(f"label must be 0, 1, or None, got {self.label}")
        if (self.target is not None) != (self.label == 1):
            raise ValueError("target must be present exactly when label == 1")

    @property
    def center_us(self) -> float:
        return (self.t_start + self.t_end) / 2


def window_frames_to_seconds(n_eye_frames: float, eye_hz: float = DEFAULT_EYE_HZ) -> float:
    """Convert a window size given in eye-camera frames to seconds.

    The eye camera runs at 200 Hz, so T frames last T / 200 seconds.
    """
    if n_eye_frames <= 0:
        raise ValueError(f"frame count must be positive, got {n_eye_frames}")
    return n_eye_frames / eye_hz


def slice_windows(rec: Recording, spec: WindowSpec) -> tuple[list[TimeWindow], int]:
    """Cut a recording into unlabeled windows.

    Windows start at the first sample time and advance by the stride while
    a full window still fits inside the sampled span. Windows that contain
    no samples are skipped; the skip count is returned alongside.
    """
    t = np.array([s.t for s in rec.samples], dtype=np.float64)
    t0 = int(round(rec.samples[0].t))
    duration = rec.samples[-1].t - t0
    length, stride = spec.length_us, spec.stride_us
    if duration < length:
        return [], 0
    n_starts = int((duration - length) // stride) + 1
    windows: list[TimeWindow] = []
    skipped = 0
    for i in range(n_starts):
        t_start = t0 + i * stride
        t_end = t_start + length
        lo = int(np.searchsorted(t, t_start, side="left"))
        hi = int(np.searchsorted(t, t_end, side="left"))
        if hi == lo:
            skipped += 1
            continue
        windows.append(TimeWindow(t_start, t_end, rec.samples[lo:hi]))
    return windows, skipped


def _frame_span(t_start: int, t_end: int, scene_hz: Fraction) -> tuple[int, int]:
    # frame f belongs to the window iff its midpoint (f + 0.5) / hz seconds
    # lies in [t_start, t_end); solved exactly for the inclusive range
    lo = (2 * scene_hz * t_start / _US - 1) / 2
    hi = (2 * scene_hz * t_end / _US - 1) / 2
    return max(0, math.ceil(lo)), math.ceil(hi) - 1


def _normalized_target(ann, bounds) -> BoxTarget:
    clip = lambda v: min(max(v, 0.0), 1.0)
    return BoxTarget(
        x=clip(ann.x / bounds.r_x),
        y=clip(ann.y / bounds.r_y),
        w=clip(ann.w / bounds.r_x),
        h=clip(ann.h / bounds.r_y),
    )


def _label_one(win: TimeWindow, rec: Recording, frames: list[int], scene_hz: Fraction) -> TimeWindow:
    f_lo, f_hi = _frame_span(win.t_start, win.t_end, scene_hz)
    lo = bisect_left(frames, f_lo)
    hi = bisect_right(frames, f_hi)
    if hi == lo:
        return TimeWindow(win.t_start, win.t_end, win.samples, label=0)
    # distance of each candidate's frame midpoint to the window center,
    # scaled by 2*hz so it stays an exact rational; earlier frame wins ties
    center2 = win.t_start + win.t_end
    best = min(
        range(lo, hi),
        key=lambda i: (abs((2 * frames[i] + 1) * _US - scene_hz * center2), frames[i]),
    )
    target = _normalized_target(rec.annotations[best], rec.bounds)
    return TimeWindow(win.t_start, win.t_end, win.samples, label=1, target=target)


def label_window(win: TimeWindow, rec: Recording, scene_hz: float = DEFAULT_SCENE_HZ) -> TimeWindow:
    """Assign the class label and, for class 1, the central box target."""
    frames = [a.frame_idx for a in rec.annotations]
    return _label_one(win, rec, frames, Fraction(str(scene_hz)))


def label_windows(
    rec: Recording, windows, scene_hz: float = DEFAULT_SCENE_HZ
) -> list[TimeWindow]:
    """Label many windows of one recording."""
    frames = [a.frame_idx for a in rec.annotations]
    hz = Fraction(str(scene_hz))
    return [_label_one(w, rec, frames, hz) for w in windows]


def sliced_labeled_windows(
    rec: Recording, spec: WindowSpec, scene_hz: float = DEFAULT_SCENE_HZ
) -> tuple[list[TimeWindow], int]:
    """slice_windows + label_windows in one step."""
    windows, skipped = slice_windows(rec, spec)
    return label_windows(rec, windows, scene_hz), skipped


def write_windows_csv(path, rows) -> None:
    """Emit (recording_id, window) pairs as the windows CSV interface."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["recording_id", "t_start", "t_end", "n_samples", "label", "x", "y", "w", "h"]
        )
        for rec_id, win in rows:
            tgt = win.target
            writer.writerow(
                [
                    rec_id,
                    win.t_start,
                    win.t_end,
                    len(win.samples),
                    "" if win.label is None else win.label,
                    repr(tgt.x) if tgt else "",
                    repr(tgt.y) if tgt else "",
                    repr(tgt.w) if tgt else "",
                    repr(tgt.h) if tgt else "",
                ]
            )
