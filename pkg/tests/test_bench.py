import numpy as np
import pytest

import gazebox.eval as eval_mod
from gazebox.bench import (
    BenchReport,
    format_bench_table,
    measure_memory,
    prepare_inputs,
    run_bench,
    time_predictions,
    write_bench_csv,
)
from gazebox.gaze_data import StimulusBounds
from gazebox.heatmap import GridSpec
from gazebox.learners import Dataset, fit_learner
from gazebox.synth import generate_corpus

BOUNDS = StimulusBounds(1088.0, 1080.0, 5.0)


def tiny_model():
    rng = np.random.default_rng(0)
    return fit_learner("knn", Dataset(rng.random((30, 16)), rng.integers(0, 2, 30)))


def test_zero_predictions_reports_zero_and_empty_flag():
    model = tiny_model()
    total, reps = time_predictions(model, np.empty((0, 16)))
    assert total == 0.0 and all(t == 0.0 for t in reps)


def test_time_predictions_positive_and_median():
    model = tiny_model()
    inputs = np.random.default_rng(1).random((20, 16))
    total, reps = time_predictions(model, inputs, repeats=3)
    assert len(reps) == 3
    assert total == sorted(reps)[1]
    assert total > 0


def test_measure_memory_input_arithmetic():
    model = tiny_model()
    x = np.random.default_rng(2).random(16)
    input_bytes, transient = measure_memory(model, x)
    assert input_bytes == 16 * 4
    assert transient >= 0
    # the 2D grid-10 feature serializes to 100 * 4 bytes
    assert 100 * 4 == 400
    # the largest 3D feature is 1250x the 2D grid-10 feature
    assert GridSpec.square(50, BOUNDS, "3d").n_cells * 4 == 1250 * 400


def test_refuses_to_run_during_sweep():
    model = tiny_model()
    eval_mod._active_sweeps += 1
    try:
        with pytest.raises(RuntimeError, match="concurrently"):
            time_predictions(model, np.empty((0, 16)))
    finally:
        eval_mod._active_sweeps -= 1


def test_prepare_inputs_distinct():
    recs = generate_corpus(1, 30.0, seed=4)
    spec = GridSpec.square(10, BOUNDS, "2d")
    feats = prepare_inputs(recs, 250.0, spec, 50)
    assert feats.shape == (50, 100)
    assert len(np.unique(feats, axis=0)) == 50
    with pytest.raises(ValueError, match="distinct windows"):
        prepare_inputs(recs, 250.0, spec, 10_000)


def test_run_bench_report_fields(tmp_path):
    recs = generate_corpus(1, 30.0, seed=5)
    reports = run_bench(
        recs,
        recs,
        learner_names=("knn", "bagged_trees"),
        grids=(5, 10),
        dims_list=("2d",),
        n_predictions=30,
        repeats=2,
    )
    assert len(reports) == 4
    for r in reports:
        assert isinstance(r, BenchReport)
        assert r.n_predictions == 30 and not r.empty
        assert r.total_time_s > 0
        assert "tracemalloc" in r.methodology
        assert "warm-up" in r.methodology
        assert r.environment
    path = tmp_path / "bench.csv"
    write_bench_csv(path, reports)
    header = path.read_text().splitlines()[0]
    assert "total_time_s" in header and "transient_peak_bytes" in header
    table = format_bench_table(reports)
    assert "learner" in table and "knn" in table


def test_run_bench_empty_inputs_flagged():
    recs = generate_corpus(1, 10.0, seed=6)
    reports = run_bench(
        recs, recs, learner_names=("knn",), grids=(5,), dims_list=("2d",), n_predictions=0
    )
    assert reports[0].empty and reports[0].total_time_s == 0.0
