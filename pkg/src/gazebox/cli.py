"""gazebox command line interface.

Subcommands cover the pipeline end to end: ingest or synthesize
recordings, slice and label windows, featurize them into heatmap
vectors, train and apply individual learners, run the evaluation sweep,
benchmark prediction cost, and render report figures. Every run is
driven by a YAML config (flags override keys) and writes a manifest
with the merged config, seed, and library versions into its output
directory. Exit codes: 0 success, 1 usage error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import eval as eval_mod
from . import learners, report
from .config import RunConfig, write_manifest
from .gaze_data import DataError, merge_bounds, write_annotations_csv, write_gaze_csv
from .heatmap import (
    GridSpec,
    features_for_windows,
    read_feature_file,
    write_feature_file,
    write_features_csv,
)
from .windowing import sliced_labeled_windows, write_windows_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract is exit 1
        raise UsageError(message)


def _load_config(args, extra_overrides: dict | None = None) -> RunConfig:
    overrides = {
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out", None),
        "workers": getattr(args, "workers", None),
    }
    overrides.update(extra_overrides or {})
    overrides = {
        k: str(v) if isinstance(v, Path) else v for k, v in overrides.items()
    }
    return RunConfig.load(getattr(args, "config", None), overrides)


def _out_dir(cfg: RunConfig) -> Path:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window_rows(cfg: RunConfig, recordings):
    spec = cfg.window_spec()
    rows = []
    for rec in recordings:
        wins, _ = sliced_labeled_windows(rec, spec, scene_hz=cfg.scene_hz)
        rows.extend((rec.id, w) for w in wins)
    return rows


def _feature_arrays(cfg: RunConfig, recordings):
    size, dims = cfg.grid()
    spec = GridSpec.square(size, merge_bounds(recordings), dims)
    rows = _window_rows(cfg, recordings)
    windows = [w for _, w in rows]
    labels = np.array([w.label for w in windows], dtype=np.uint8)
    targets = np.full((len(windows), 4), np.nan)
    for i, w in enumerate(windows):
        if w.target is not None:
            targets[i] = w.target.as_array()
    feats = features_for_windows(windows, spec)
    return spec, rows, labels, targets, feats


def cmd_ingest(args) -> int:
    cfg = _load_config(args, {"data.dir": args.data_dir})
    out = _out_dir(cfg)
    pairs = cfg.load_recordings_with_stats()
    with open(out / "ingest_stats.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "recording_id",
                "samples",
                "gaze_rows",
                "gaze_dropped",
                "annotations",
                "box_rows",
                "box_dropped",
                "r_x",
                "r_y",
                "r_z",
            ]
        )
        for rec, stats in pairs:
            write_gaze_csv(out / f"{rec.id}.gaze.csv", rec.samples, cfg.gaze_schema())
            write_annotations_csv(out / f"{rec.id}.boxes.csv", rec.annotations, cfg.box_schema())
            writer.writerow(
                [
                    rec.id,
                    len(rec.samples),
                    stats["gaze_rows"],
                    stats["gaze_dropped"],
                    len(rec.annotations),
                    stats["box_rows"],
                    stats["box_dropped"],
                    rec.bounds.r_x,
                    rec.bounds.r_y,
                    rec.bounds.r_z,
                ]
            )
    write_manifest(out, cfg, "ingest", {"n_recordings": len(pairs)})
    print(f"ingested {len(pairs)} recording(s) into {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if (cfg.raw.get("data") or {}).get("synth") is None:
        raise UsageError("synth requires a data.synth section in the config")
    out = _out_dir(cfg)
    recordings = cfg.load_recordings()
    for rec in recordings:
        write_gaze_csv(out / f"{rec.id}.gaze.csv", rec.samples, cfg.gaze_schema())
        write_annotations_csv(out / f"{rec.id}.boxes.csv", rec.annotations, cfg.box_schema())
    write_manifest(out, cfg, "synth", {"n_recordings": len(recordings)})
    print(f"wrote {len(recordings)} synthetic recording(s) to {out}")
    return EXIT_OK


def cmd_windows(args) -> int:
    cfg = _load_config(
        args,
        {"windowing.length_ms": args.length_ms, "windowing.stride_ms": args.stride_ms},
    )
    out = _out_dir(cfg)
    rows = _window_rows(cfg, cfg.load_recordings())
    write_windows_csv(out / "windows.csv", rows)
    write_manifest(out, cfg, "windows", {"n_windows": len(rows)})
    print(f"wrote {len(rows)} windows to {out / 'windows.csv'}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = _load_config(
        args,
        {
            "windowing.length_ms": args.length_ms,
            "windowing.stride_ms": args.stride_ms,
            "grid.size": args.grid,
            "grid.dims": args.dims,
        },
    )
    out = _out_dir(cfg)
    spec, rows, labels, targets, feats = _feature_arrays(cfg, cfg.load_recordings())
    path = out / "features.gzf"
    write_feature_file(path, (spec.g_x, spec.g_y, spec.g_z), labels, targets, feats)
    if args.csv:
        write_features_csv(out / "features.csv", (spec.g_x, spec.g_y, spec.g_z), labels, targets, feats)
    write_manifest(
        out,
        cfg,
        "featurize",
        {"n_windows": len(rows), "grid": [spec.g_x, spec.g_y, spec.g_z]},
    )
    print(f"wrote {len(rows)} feature rows ({spec.n_cells} cells) to {path}")
    return EXIT_OK


def _dataset_from_features(path, task: str) -> learners.Dataset:
    _, labels, targets, feats = read_feature_file(path)
    if task == "classify":
        return learners.Dataset(feats, labels.astype(np.int64))
    keep = labels == 1
    if not keep.any():
        raise DataError(f"{path}: no label-1 rows to train a regressor on")
    return learners.Dataset(feats[keep], targets[keep])


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    data = _dataset_from_features(args.features, args.task)
    hyper = (cfg.raw.get("hyper") or {}).get(args.learner, {})
    model = learners.fit_learner(args.learner, data, seed=cfg.seed, **hyper)
    path = learners.save_model(out / f"model_{args.learner}_{args.task}.npz", model)
    write_manifest(
        out,
        cfg,
        "train",
        {"learner": args.learner, "task": args.task, "n_train": data.n, "model": path.name},
    )
    print(f"trained {args.learner} ({args.task}) on {data.n} rows -> {path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    model = learners.load_model(args.model)
    _, labels, targets, feats = read_feature_file(args.features)
    task = getattr(model, "task", None)
    if task is None:
        task = "classify" if isinstance(model, learners.SvmModel) else "regress"
    preds = model.predict(feats)
    path = out / "predictions.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if task == "classify":
            writer.writerow(["index", "label", "pred"])
            for i, p in enumerate(preds):
                writer.writerow([i, int(labels[i]), int(p)])
        else:
            preds = np.clip(preds, 0.0, 1.0)
            writer.writerow(["index", "label", "x", "y", "w", "h", "pred_x", "pred_y", "pred_w", "pred_h"])
            for i, p in enumerate(preds):
                truth = ["" if np.isnan(v) else repr(float(v)) for v in targets[i]]
                writer.writerow([i, int(labels[i])] + truth + [repr(float(v)) for v in p])
    write_manifest(out, cfg, "predict", {"model": str(args.model), "n_rows": len(preds)})
    print(f"wrote {len(preds)} predictions to {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    recordings = cfg.load_recordings()
    tasks = [args.task] if args.task in ("classify", "regress") else ["classify", "regress"]
    if args.task is None:
        tasks = [cfg.sweep_config().task]
    written = []
    for task in tasks:
        sweep_cfg = dataclasses.replace(cfg.sweep_config(), task=task)
        result = eval_mod.run_sweep(recordings, sweep_cfg, workers=cfg.workers)
        results_path = out / f"results_{task}.csv"
        summary_path = out / f"summary_{task}.csv"
        eval_mod.write_results_csv(results_path, result)
        eval_mod.write_summary_csv(summary_path, result)
        written.extend([results_path.name, summary_path.name])
        n_ok = sum(c.status == "ok" for c in result.cells)
        print(f"{task}: {len(result.cells)} cells ({n_ok} ok) -> {results_path}")
    write_manifest(out, cfg, "eval", {"tasks": tasks, "files": written})
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    recordings = cfg.load_recordings()
    reports = bench_mod.run_bench(
        recordings, recordings, seed=cfg.seed, scene_hz=cfg.scene_hz, **cfg.bench_params()
    )
    bench_mod.write_bench_csv(out / "bench.csv", reports)
    table = bench_mod.format_bench_table(reports)
    (out / "bench.txt").write_text(table + "\n", encoding="utf-8")
    write_manifest(out, cfg, "bench", {"n_reports": len(reports)})
    print(table)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    if not args.results and not args.bench:
        raise UsageError("report needs --results and/or --bench")
    written = []
    for path in args.results or []:
        written.extend(report.render_sweep_report(path, out))
    if args.bench:
        written.extend(report.render_bench_report(args.bench, out))
    inputs = [str(p) for p in (args.results or [])]
    if args.bench:
        inputs.append(str(args.bench))
    write_manifest(out, cfg, "report", {"inputs": inputs})
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="gazebox", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--config", type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--workers", type=int, help="parallel worker cap")
        return p

    p = add("ingest", cmd_ingest, "parse a dataset and write normalized CSVs + stats")
    p.add_argument("--data-dir", type=Path, help="directory of *.gaze.csv/*.boxes.csv pairs")

    add("synth", cmd_synth, "generate synthetic recordings from the config")

    p = add("windows", cmd_windows, "slice recordings into labeled windows (CSV)")
    p.add_argument("--length-ms", type=float, help="window length override")
    p.add_argument("--stride-ms", type=float, help="window stride override")

    p = add("featurize", cmd_featurize, "turn windows into a binary heatmap-feature file")
    p.add_argument("--length-ms", type=float)
    p.add_argument("--stride-ms", type=float)
    p.add_argument("--grid", type=int, help="cells per axis")
    p.add_argument("--dims", choices=("2d", "3d"))
    p.add_argument("--csv", action="store_true", help="also write a debug CSV")

    p = add("train", cmd_train, "fit one learner on a feature file")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--learner", required=True, choices=("knn", "bagged_trees", "svm", "gp"))
    p.add_argument("--task", default="classify", choices=("classify", "regress"))

    p = add("predict", cmd_predict, "apply a saved model to a feature file")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)

    p = add("eval", cmd_eval, "run the cross-validated sweep")
    p.add_argument("--task", choices=("classify", "regress", "both"))

    add("bench", cmd_bench, "measure prediction time and memory")

    p = add("report", cmd_report, "render figures from sweep/bench CSVs")
    p.add_argument("--results", type=Path, action="append", help="sweep results CSV (repeatable)")
    p.add_argument("--bench", type=Path, help="bench CSV")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
