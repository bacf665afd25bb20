"""Run configuration: one YAML file drives every subcommand.

Flags override config keys; the merged configuration is validated before
any work starts and serialized into a manifest in every output directory
so runs stay auditable and repeatable.
"""

from __future__ import annotations

import json
import platform
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .gaze_data import (
    BoxColumnMap,
    ColumnMap,
    DEFAULT_EYE_HZ,
    DEFAULT_R_X,
    DEFAULT_R_Y,
    DEFAULT_SCENE_HZ,
    StimulusBounds,
    discover_recordings,
    load_recording,
)
from .eval import DEFAULT_GRID_SIZES, DEFAULT_WINDOW_LENGTHS_MS, SweepConfig
from .synth import generate_corpus
from .windowing import WindowSpec

_KNOWN_TOP = {
    "seed",
    "out_dir",
    "workers",
    "stimulus",
    "rates",
    "columns",
    "data",
    "windowing",
    "grid",
    "sweep",
    "hyper",
    "bench",
}

_KNOWN_SECTIONS = {
    "stimulus": {"r_x", "r_y", "r_z"},
    "rates": {"scene_hz", "eye_hz"},
    "columns": {"gaze", "boxes"},
    "data": {"dir", "recordings", "synth"},
    "windowing": {"length_ms", "stride_ms"},
    "grid": {"size", "dims"},
    "sweep": {
        "window_lengths_ms",
        "grid_sizes",
        "dims",
        "learners",
        "task",
        "folds",
        "fold_mode",
        "subsample_cap",
    },
    "bench": {"learners", "grids", "dims", "window_ms", "n_predictions", "repeats"},
}

_SYNTH_KEYS = {
    "n_recordings",
    "duration_s",
    "seed",
    "episode_s",
    "gap_s",
    "n_box_sites",
    "fixation_jitter_px",
    "scan_jitter_px",
    "walk_drift_px_per_s",
}


class RunConfig:
    """Validated view over the configuration mapping."""

    def __init__(self, raw: dict | None):
        self.raw = raw or {}
        self._validate()

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        raw = {}
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ValueError(f"config file not found: {path}")
            with open(path, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh)
            if loaded is None:
                loaded = {}
            if not isinstance(loaded, dict):
                raise ValueError(f"{path}: config root must be a mapping")
            raw = loaded
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            section = raw
            *heads, leaf = key.split(".")
            for head in heads:
                section = section.setdefault(head, {})
            section[leaf] = value
        return cls(raw)

    def _validate(self):
        unknown = set(self.raw) - _KNOWN_TOP
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        for section, allowed in _KNOWN_SECTIONS.items():
            entries = self.raw.get(section)
            if entries is None:
                continue
            if not isinstance(entries, dict):
                raise ValueError(f"config section {section!r} must be a mapping")
            bad = set(entries) - allowed
            if bad:
                raise ValueError(f"unknown key(s) in {section!r}: {sorted(bad)}")
        synth = (self.raw.get("data") or {}).get("synth")
        if synth is not None:
            bad = set(synth) - _SYNTH_KEYS
            if bad:
                raise ValueError(f"unknown key(s) in data.synth: {sorted(bad)}")
        # instantiating the typed views exercises their own validation
        self.window_spec()
        self.sweep_config()

    # ---- simple scalars ----

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def workers(self) -> int:
        return max(1, int(self.raw.get("workers", 1)))

    @property
    def out_dir(self) -> Path:
        return Path(self.raw.get("out_dir", "runs/out"))

    @property
    def scene_hz(self) -> float:
        return float((self.raw.get("rates") or {}).get("scene_hz", DEFAULT_SCENE_HZ))

    @property
    def eye_hz(self) -> float:
        return float((self.raw.get("rates") or {}).get("eye_hz", DEFAULT_EYE_HZ))

    # ---- typed views ----

    def bounds(self) -> StimulusBounds | None:
        """Configured bounds, or None when r_z should come from the data."""
        stim = self.raw.get("stimulus") or {}
        r_z = stim.get("r_z")
        if r_z is None:
            return None
        return StimulusBounds(
            r_x=float(stim.get("r_x", DEFAULT_R_X)),
            r_y=float(stim.get("r_y", DEFAULT_R_Y)),
            r_z=float(r_z),
        )

    def default_resolution(self) -> tuple[float, float]:
        stim = self.raw.get("stimulus") or {}
        return float(stim.get("r_x", DEFAULT_R_X)), float(stim.get("r_y", DEFAULT_R_Y))

    def gaze_schema(self) -> ColumnMap:
        cols = (self.raw.get("columns") or {}).get("gaze") or {}
        return ColumnMap(**cols)

    def box_schema(self) -> BoxColumnMap:
        cols = (self.raw.get("columns") or {}).get("boxes") or {}
        return BoxColumnMap(**cols)

    def window_spec(self) -> WindowSpec:
        win = self.raw.get("windowing") or {}
        return WindowSpec(
            length_ms=float(win.get("length_ms", 500.0)),
            stride_ms=None if win.get("stride_ms") is None else float(win["stride_ms"]),
        )

    def grid(self) -> tuple[int, str]:
        grid = self.raw.get("grid") or {}
        size = int(grid.get("size", 25))
        dims = str(grid.get("dims", "2d"))
        if dims not in ("2d", "3d"):
            raise ValueError(f"grid.dims must be '2d' or '3d', got {dims!r}")
        return size, dims

    def sweep_config(self, task: str = "classify") -> SweepConfig:
        sweep = self.raw.get("sweep") or {}
        return SweepConfig(
            window_lengths_ms=tuple(sweep.get("window_lengths_ms", DEFAULT_WINDOW_LENGTHS_MS)),
            grid_sizes=tuple(sweep.get("grid_sizes", DEFAULT_GRID_SIZES)),
            dims=tuple(sweep.get("dims", ("2d", "3d"))),
            learner_names=tuple(sweep.get("learners", ("knn", "bagged_trees", "svm", "gp"))),
            task=str(sweep.get("task", task)),
            folds=int(sweep.get("folds", 5)),
            seed=self.seed,
            fold_mode=str(sweep.get("fold_mode", "window")),
            subsample_cap=int(sweep.get("subsample_cap", 3000)),
            scene_hz=self.scene_hz,
            hyper=dict(self.raw.get("hyper") or {}),
        )

    def bench_params(self) -> dict:
        bench = self.raw.get("bench") or {}
        return {
            "learner_names": tuple(bench.get("learners", ("knn", "bagged_trees", "svm"))),
            "grids": tuple(bench.get("grids", (10, 50))),
            "dims_list": tuple(bench.get("dims", ("2d",))),
            "window_ms": float(bench.get("window_ms", 250.0)),
            "n_predictions": int(bench.get("n_predictions", 1000)),
            "repeats": int(bench.get("repeats", 3)),
        }

    # ---- data loading ----

    def load_recordings(self):
        return [rec for rec, _ in self.load_recordings_with_stats()]

    def load_recordings_with_stats(self):
        """Recordings plus per-recording parse statistics dicts."""
        data = self.raw.get("data") or {}
        synth = data.get("synth")
        if synth is not None:
            params = dict(synth)
            n = int(params.pop("n_recordings", 1))
            duration = float(params.pop("duration_s", 60.0))
            seed = int(params.pop("seed", self.seed))
            recs = generate_corpus(n, duration, seed=seed, **params)
            return [
                (
                    rec,
                    {
                        "gaze_rows": len(rec.samples),
                        "gaze_dropped": 0,
                        "box_rows": len(rec.annotations),
                        "box_dropped": 0,
                    },
                )
                for rec in recs
            ]
        gaze_schema = self.gaze_schema()
        box_schema = self.box_schema()
        bounds = self.bounds()
        r_x, r_y = self.default_resolution()
        pairs = []
        if data.get("recordings"):
            for entry in data["recordings"]:
                pairs.append((str(entry["id"]), entry["gaze"], entry["boxes"]))
        elif data.get("dir"):
            pairs = discover_recordings(data["dir"])
        else:
            raise ValueError("config data section must provide synth, recordings, or dir")
        out = []
        for rec_id, gaze_path, boxes_path in pairs:
            rec, gaze, anns = load_recording(
                gaze_path,
                boxes_path,
                id=rec_id,
                gaze_schema=gaze_schema,
                box_schema=box_schema,
                bounds=bounds,
                default_r_x=r_x,
                default_r_y=r_y,
            )
            out.append(
                (
                    rec,
                    {
                        "gaze_rows": gaze.n_rows,
                        "gaze_dropped": gaze.n_dropped,
                        "box_rows": anns.n_rows,
                        "box_dropped": anns.n_dropped,
                    },
                )
            )
        return out


def versions() -> dict:
    return {
        "gazebox": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def write_manifest(out_dir, config: RunConfig, command: str, extra: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "seed": config.seed,
        "config": config.raw,
        "versions": versions(),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
