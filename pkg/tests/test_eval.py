import dataclasses

import numpy as np
import pytest

from gazebox.eval import (
    SweepConfig,
    accuracy,
    grouped_kfold,
    kfold_split,
    mae_normalized,
    run_sweep,
    stratified_kfold,
    write_results_csv,
    write_summary_csv,
)
from gazebox.gaze_data import StimulusBounds
from gazebox.heatmap import GridSpec, features_for_windows
from gazebox.synth import ObjectEpisode, SynthSpec, generate, generate_corpus
from gazebox.windowing import WindowSpec, sliced_labeled_windows

BOUNDS = StimulusBounds(1088.0, 1080.0, 5.0)


# ---------------------------------------------------------------- folds


def test_kfold_balanced_sizes():
    plan = kfold_split(10, 5, seed=0)
    assert sorted(np.bincount(plan.assignment)) == [2, 2, 2, 2, 2]
    plan = kfold_split(11, 5, seed=0)
    assert sorted(np.bincount(plan.assignment)) == [2, 2, 2, 2, 3]


def test_kfold_partitions():
    plan = kfold_split(23, 5, seed=3)
    seen = np.concatenate([plan.test_indices(f) for f in range(5)])
    assert sorted(seen) == list(range(23))
    for f in range(5):
        assert set(plan.test_indices(f)).isdisjoint(plan.train_indices(f))


def test_kfold_deterministic_and_seed_sensitive():
    a = kfold_split(40, 5, seed=1)
    b = kfold_split(40, 5, seed=1)
    c = kfold_split(40, 5, seed=2)
    assert np.array_equal(a.assignment, b.assignment)
    assert not np.array_equal(a.assignment, c.assignment)


def test_kfold_rejects_small_n():
    with pytest.raises(ValueError):
        kfold_split(4, 5, seed=0)


def test_stratified_kfold_balances_classes():
    labels = np.array([0] * 40 + [1] * 10)
    plan = stratified_kfold(labels, 5, seed=0)
    for f in range(5):
        test = plan.test_indices(f)
        assert (labels[test] == 1).sum() == 2
        assert len(test) == 10


def test_grouped_kfold_keeps_groups_together():
    groups = np.repeat(np.arange(10), 7)
    plan = grouped_kfold(groups, 5, seed=0)
    for g in range(10):
        folds = plan.assignment[groups == g]
        assert len(set(folds)) == 1
    with pytest.raises(ValueError):
        grouped_kfold(np.array([0, 0, 1, 1]), 5, seed=0)


# ---------------------------------------------------------------- metrics


def test_accuracy_cases():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    assert accuracy([1, 1, 1], [0, 0, 0]) == 0.0
    assert accuracy([1, 0, 1, 0], [1, 0, 0, 1]) == 0.5
    assert accuracy([1, 0, 1, 1], [1, 0, 1, 0]) == 0.75
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy([1], [1, 0])


def test_mae_normalized_cases():
    preds = np.array([[0.55, 0.5, 0.5, 0.5]])
    truth = np.array([[0.50, 0.5, 0.5, 0.5]])
    assert mae_normalized(preds, truth) == pytest.approx([5.0, 0.0, 0.0, 0.0])
    assert mae_normalized(truth, truth) == pytest.approx([0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        mae_normalized(np.empty((0, 4)), np.empty((0, 4)))
    with pytest.raises(ValueError):
        mae_normalized(np.full((1, 4), 1.5), truth)


def test_mae_unit_is_roughly_ten_pixels():
    # one reported unit is r_x/100 = 10.88 pixels at the scene resolution,
    # which is what the "multiply by ten" rule of thumb approximates
    pixels_per_unit = BOUNDS.r_x / 100.0
    assert pixels_per_unit == pytest.approx(10.0, rel=0.1)


# ---------------------------------------------------------------- sweep


def small_corpus(seed=0, n=4, duration=24.0):
    return generate_corpus(n, duration, seed=seed, episode_s=2.0, gap_s=2.0)


def small_config(**kw):
    base = dict(
        window_lengths_ms=(250, 500),
        grid_sizes=(10, 20),
        dims=("2d", "3d"),
        learner_names=("knn", "bagged_trees"),
        task="classify",
        seed=5,
    )
    base.update(kw)
    return SweepConfig(**base)


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(window_lengths_ms=())
    with pytest.raises(ValueError):
        SweepConfig(task="cluster")
    with pytest.raises(ValueError):
        SweepConfig(dims=("4d",))
    with pytest.raises(ValueError):
        SweepConfig(fold_mode="chronological")
    assert SweepConfig(task="regress").active_learners == ("knn", "bagged_trees", "gp")
    assert SweepConfig(task="classify").active_learners == ("knn", "bagged_trees", "svm")


def test_sweep_separable_corpus_all_cells_accurate():
    recs = small_corpus()
    # dispersion oracle: peak cell mass alone separates the two classes,
    # so any reasonable learner should reach 0.90
    windows = []
    for rec in recs:
        wins, _ = sliced_labeled_windows(rec, WindowSpec(500))
        windows.extend(wins)
    feats = features_for_windows(windows, GridSpec.square(20, BOUNDS, "2d"))
    labels = np.array([w.label for w in windows])
    peaks = feats.max(axis=1)
    threshold = (peaks[labels == 1].min() + peaks[labels == 0].max()) / 2
    oracle_acc = ((peaks > threshold).astype(int) == labels).mean()
    assert oracle_acc >= 0.95

    result = run_sweep(recs, small_config())
    assert len(result.cells) == 2 * 2 * 2 * 2
    for cell in result.cells:
        assert cell.status == "ok"
        assert cell.means[0] >= 0.90, f"{cell.key} accuracy {cell.means[0]}"


def test_sweep_no_signal_corpus_matches_class_prior():
    # degenerate case: every window carries the exact same feature vector,
    # labels split half and half; accuracy can only match the class prior
    spec = SynthSpec(duration_s=30.0, episodes=(), bounds=BOUNDS, seed=3)
    rec = generate(spec)
    windows, _ = sliced_labeled_windows(rec, WindowSpec(250))
    feats = features_for_windows(windows, GridSpec.square(10, BOUNDS, "2d"))
    feats = np.tile(feats[0], (len(windows), 1))
    rng = np.random.default_rng(0)
    labels = rng.permutation(np.arange(len(windows)) % 2)
    from gazebox import learners
    from gazebox.eval import stratified_kfold as strat

    plan = strat(labels, 5, seed=1)
    for name in ("bagged_trees", "knn"):
        accs = []
        for fold in range(5):
            tr, te = plan.train_indices(fold), plan.test_indices(fold)
            model = learners.fit_learner(name, learners.Dataset(feats[tr], labels[tr]), seed=2)
            accs.append(accuracy(model.predict(feats[te]), labels[te]))
        assert abs(np.mean(accs) - 0.5) <= 0.05, name


def test_sweep_full_default_grid_has_300_classification_cells():
    # 2 dims x 5 windows x 10 grids x 3 learners; a tiny recording keeps the
    # runnable cells small and the rest are recorded as skipped
    spec = SynthSpec(
        duration_s=0.8,
        episodes=(ObjectEpisode(0.3, 0.5, (400.0, 400.0, 120.0, 120.0), 6.0),),
        bounds=BOUNDS,
        seed=2,
    )
    recs = [generate(spec)]
    result = run_sweep(recs, SweepConfig(task="classify", seed=1))
    assert len(result.cells) == 300
    skipped = [c for c in result.cells if c.status == "skipped"]
    ok = [c for c in result.cells if c.status == "ok"]
    assert skipped and ok
    assert all("<k=" in c.reason for c in skipped)
    # only the 100 ms windows yield enough samples on a 0.8 s recording
    assert {c.window_ms for c in ok} == {100}


def test_sweep_regression_uses_only_labelled_windows():
    recs = small_corpus(seed=1, n=2)
    cfg = small_config(task="regress", learner_names=("knn", "gp"), grid_sizes=(10,), dims=("2d",))
    result = run_sweep(recs, cfg)
    n_label1 = 0
    for rec in recs:
        wins, _ = sliced_labeled_windows(rec, WindowSpec(500))
        n_label1 += sum(w.label == 1 for w in wins)
    for cell in result.cells:
        if cell.window_ms == 500:
            assert cell.n_windows == n_label1
        assert cell.status == "ok"
        assert len(cell.metric_names) == 4
        for mean, lo, hi in zip(
            cell.means,
            np.asarray(cell.fold_values).min(axis=0),
            np.asarray(cell.fold_values).max(axis=0),
        ):
            assert lo - 1e-12 <= mean <= hi + 1e-12


def test_sweep_bit_identical_for_fixed_seed(tmp_path):
    recs = small_corpus(seed=2, n=2, duration=16.0)
    cfg = small_config(grid_sizes=(10,), window_lengths_ms=(500,))
    a = run_sweep(recs, cfg)
    b = run_sweep(recs, cfg)
    assert a.cells == b.cells
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results_csv(pa, a)
    write_results_csv(pb, b)
    assert pa.read_bytes() == pb.read_bytes()
    c = run_sweep(recs, dataclasses.replace(cfg, seed=99))
    assert c.cells != a.cells


def test_sweep_workers_merge_deterministically():
    recs = small_corpus(seed=3, n=2, duration=16.0)
    cfg = small_config(window_lengths_ms=(250, 500), grid_sizes=(5, 10))
    serial = run_sweep(recs, cfg, workers=1)
    threaded = run_sweep(recs, cfg, workers=4)
    assert serial.cells == threaded.cells


def test_sweep_mean_matches_fold_average():
    recs = small_corpus(seed=4, n=2, duration=16.0)
    result = run_sweep(recs, small_config(grid_sizes=(10,), window_lengths_ms=(500,)))
    for cell in result.cells:
        arr = np.asarray(cell.fold_values)
        assert cell.means == pytest.approx(arr.mean(axis=0), abs=1e-12)
        assert min(arr[:, 0]) - 1e-12 <= cell.means[0] <= max(arr[:, 0]) + 1e-12


def test_sweep_subsample_cap_recorded():
    recs = small_corpus(seed=5, n=3, duration=30.0)
    cfg = small_config(
        learner_names=("svm",),
        grid_sizes=(10,),
        window_lengths_ms=(250,),
        dims=("2d",),
        subsample_cap=40,
    )
    result = run_sweep(recs, cfg)
    for cell in result.cells:
        assert cell.status == "ok"
        assert cell.subsampled_to == 40


def test_sweep_recording_mode_folds():
    recs = small_corpus(seed=6, n=5, duration=16.0)
    cfg = small_config(grid_sizes=(10,), window_lengths_ms=(500,), fold_mode="recording")
    result = run_sweep(recs, cfg)
    assert all(c.status == "ok" for c in result.cells)


def test_summary_csv_layout(tmp_path):
    recs = small_corpus(seed=7, n=2, duration=16.0)
    cfg = small_config()
    result = run_sweep(recs, cfg)
    path = tmp_path / "summary.csv"
    write_summary_csv(path, result)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["dims", "learner", "grid"]
    assert "accuracy_w250" in header and "accuracy_w500" in header
    assert len(lines) - 1 == 2 * 2 * 2  # dims x learners x grids
