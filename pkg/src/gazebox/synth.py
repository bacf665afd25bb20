"""Synthetic gaze recordings with known ground truth.

The generator alternates two regimes: during an object episode the gaze
fixates the box center with small jitter (optionally drifting to imitate
a walking subject, which smears the heatmap into a trajectory), and
between episodes it scans widely across the stimulus. Depth decreases
linearly within an episode, mimicking a subject approaching the object,
which is what gives the 3D feature its extra signal. Everything is drawn
from one seeded generator, so a spec reproduces byte-identical data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaze_data import (
    BoxAnnotation,
    DEFAULT_SCENE_HZ,
    GazeSample,
    Recording,
    StimulusBounds,
    join_recording,
)

_US = 1_000_000


@dataclass(frozen=True)
class ObjectEpisode:
    """A time span during which the synthetic subject fixates one box."""

    start_s: float
    end_s: float
    box: tuple[float, float, float, float]  # x, y, w, h in pixels
    fixation_jitter_px: float = 8.0

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise ValueError(f"episode must have positive length: {self}")
        if self.fixation_jitter_px <= 0:
            raise ValueError(f"fixation jitter must be > 0, got {self.fixation_jitter_px}")
        if self.box[2] <= 0 or self.box[3] <= 0:
            raise ValueError(f"episode box must have positive size: {self.box}")


@dataclass(frozen=True)
class SynthSpec:
    duration_s: float
    episodes: tuple[ObjectEpisode, ...]
    sample_rate_hz: float = 200.0
    scan_jitter_px: float = 250.0
    walk_drift_px_per_s: float = 0.0
    bounds: StimulusBounds = field(default_factory=StimulusBounds)
    scene_hz: float = DEFAULT_SCENE_HZ
    seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ValueError("duration and sample rate must be > 0")
        if self.scan_jitter_px <= 0:
            raise ValueError(f"scan jitter must be > 0, got {self.scan_jitter_px}")
        if self.walk_drift_px_per_s < 0:
            raise ValueError("drift must be >= 0")
        eps = sorted(self.episodes, key=lambda e: e.start_s)
        for e in eps:
            if e.start_s < 0 or e.end_s > self.duration_s:
                raise ValueError(f"episode outside recording span: {e}")
        for a, b in zip(eps, eps[1:]):
            if b.start_s < a.end_s:
                raise ValueError(f"episodes overlap: {a} / {b}")


def generate(spec: SynthSpec, id: str | None = None) -> Recording:
    """Produce a Recording from a SynthSpec, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    b = spec.bounds
    n = int(round(spec.duration_s * spec.sample_rate_hz))
    if n < 1:
        raise ValueError("spec yields zero samples")
    step_us = _US / spec.sample_rate_hz
    t_us = np.round(np.arange(n) * step_us)
    t_s = t_us / _US

    # scan phase everywhere first; episode slices get overwritten below
    x = b.r_x / 2 + rng.normal(0.0, spec.scan_jitter_px, n)
    y = b.r_y / 2 + rng.normal(0.0, spec.scan_jitter_px, n)
    z = rng.uniform(0.0, b.r_z, n)

    annotations: list[BoxAnnotation] = []
    for ep in spec.episodes:
        mask = (t_s >= ep.start_s) & (t_s < ep.end_s)
        m = int(mask.sum())
        bx, by, bw, bh = ep.box
        cx, cy = bx + bw / 2, by + bh / 2
        angle = rng.uniform(0.0, 2 * math.pi)
        elapsed = t_s[mask] - ep.start_s
        drift = spec.walk_drift_px_per_s * elapsed
        x[mask] = cx + drift * math.cos(angle) + rng.normal(0.0, ep.fixation_jitter_px, m)
        y[mask] = cy + drift * math.sin(angle) + rng.normal(0.0, ep.fixation_jitter_px, m)
        # approach: depth ramps down across the episode, with slight noise
        frac = elapsed / (ep.end_s - ep.start_s)
        z[mask] = b.r_z * (0.6 - 0.2 * frac) + rng.normal(0.0, 0.005 * b.r_z, m)

        f_lo = math.ceil(ep.start_s * spec.scene_hz - 0.5)
        f_hi = math.ceil(ep.end_s * spec.scene_hz - 0.5) - 1
        for f in range(max(0, f_lo), f_hi + 1):
            annotations.append(BoxAnnotation(frame_idx=f, x=bx, y=by, w=bw, h=bh))

    np.clip(x, 0.0, b.r_x, out=x)
    np.clip(y, 0.0, b.r_y, out=y)
    np.clip(z, 0.0, b.r_z, out=z)

    samples = [
        GazeSample(t=float(t_us[i]), p_x=float(x[i]), p_y=float(y[i]), p_z=float(z[i]))
        for i in range(n)
    ]
    return join_recording(samples, annotations, b, id or f"synth-{spec.seed}")


def _box_sites(n_sites: int, bounds: StimulusBounds, seed: int) -> list[tuple]:
    rng = np.random.default_rng(seed)
    sites = []
    for _ in range(n_sites):
        w = rng.uniform(120.0, 220.0)
        h = rng.uniform(120.0, 220.0)
        bx = rng.uniform(0.0, bounds.r_x - w)
        by = rng.uniform(0.0, bounds.r_y - h)
        sites.append((bx, by, w, h))
    return sites


def corpus_spec(
    duration_s: float,
    seed: int,
    site_seed: int | None = None,
    bounds: StimulusBounds | None = None,
    episode_s: float = 2.0,
    gap_s: float = 2.0,
    n_box_sites: int = 10,
    fixation_jitter_px: float = 8.0,
    scan_jitter_px: float = 300.0,
    walk_drift_px_per_s: float = 0.0,
) -> SynthSpec:
    """Build a separable-episode spec for one corpus recording.

    Episodes alternate with scan gaps; their boxes are drawn from a small
    pool of sites (shared across a corpus via `site_seed`) so looked-at
    objects recur, the way real scenes repeat light switches and signs.
    """
    bounds = bounds or StimulusBounds()
    sites = _box_sites(n_box_sites, bounds, seed if site_seed is None else site_seed)
    rng = np.random.default_rng(seed)
    episodes = []
    start = gap_s
    while start + episode_s <= duration_s - gap_s / 2:
        box = sites[int(rng.integers(len(sites)))]
        episodes.append(
            ObjectEpisode(
                start_s=start,
                end_s=start + episode_s,
                box=box,
                fixation_jitter_px=fixation_jitter_px,
            )
        )
        start += episode_s + gap_s
    return SynthSpec(
        duration_s=duration_s,
        episodes=tuple(episodes),
        scan_jitter_px=scan_jitter_px,
        walk_drift_px_per_s=walk_drift_px_per_s,
        bounds=bounds,
        seed=seed,
    )


def generate_corpus(n_recordings: int, duration_s: float, seed: int = 0, **kwargs) -> list[Recording]:
    """Generate a deterministic multi-recording corpus.

    Recording i is seeded with `seed + 1 + i`; all recordings share one
    box-site pool (seeded by `seed`) so the same objects appear across
    recordings.
    """
    recs = []
    for i in range(n_recordings):
        spec = corpus_spec(duration_s, seed=seed + 1 + i, site_seed=seed, **kwargs)
        recs.append(generate(spec, id=f"synth-{seed}-{i:02d}"))
    return recs
