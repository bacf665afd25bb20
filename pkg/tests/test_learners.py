import math

import numpy as np
import pytest

from gazebox.learners import (
    Dataset,
    bagged_fit,
    fit_learner,
    gp_fit,
    knn_fit,
    load_model,
    save_model,
    svm_fit,
)
from gazebox.learners.trees import _best_split, _Csr


# ---------------------------------------------------------------- dataset


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 3)), np.array([0, 2]))  # labels outside {0,1}
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 3)), np.array([0]))  # length mismatch
    ds = Dataset([[1.0, 2.0]], np.array([1]))
    assert ds.task == "classify" and ds.n == 1 and ds.d == 2
    assert Dataset(np.ones((3, 2)), np.ones((3, 4))).task == "regress"


# ---------------------------------------------------------------- knn


def knn_oracle_neighbors(x_train, query, k):
    dists = [float(((row - query) ** 2).sum()) for row in x_train]
    order = sorted(range(len(x_train)), key=lambda i: (dists[i], i))
    return order[:k]


def test_knn_self_neighbor():
    rng = np.random.default_rng(1)
    x = rng.random((20, 5))
    y = rng.integers(0, 2, 20)
    model = knn_fit(Dataset(x, y), k=1)
    assert np.array_equal(model.predict(x), y)


def test_knn_majority_vote():
    x = np.array([[0.0], [0.1], [0.2], [5.0]])
    y = np.array([1, 1, 0, 0])
    model = knn_fit(Dataset(x, y), k=3)
    assert model.predict(np.array([0.05])) == 1


def test_knn_vote_tie_goes_to_nearest():
    # k=2, labels {0, 1}, the closer point is the 0
    x = np.array([[0.0], [1.0], [10.0]])
    y = np.array([0, 1, 1])
    model = knn_fit(Dataset(x, y), k=2)
    query = np.array([0.2])
    assert knn_oracle_neighbors(x, query, 2) == [0, 1]
    assert model.predict(query) == 0


def test_knn_matches_exhaustive_sort():
    rng = np.random.default_rng(42)
    x = rng.uniform(size=(60, 7))
    y = rng.integers(0, 2, 60)
    model = knn_fit(Dataset(x, y), k=4)
    queries = rng.uniform(size=(100, 7))
    got = model.neighbors(queries)
    for i, q in enumerate(queries):
        assert list(got[i]) == knn_oracle_neighbors(x, q, 4)


def test_knn_k_equals_n_is_global_vote_and_mean():
    rng = np.random.default_rng(3)
    x = rng.random((11, 4))
    y = rng.integers(0, 2, 11)
    model = knn_fit(Dataset(x, y), k=11)
    expected = 1 if y.sum() > 11 - y.sum() else 0
    assert (model.predict(rng.random((5, 4))) == expected).all()

    targets = rng.random((11, 4))
    reg = knn_fit(Dataset(x, targets), k=11)
    assert np.allclose(reg.predict(rng.random(4)), targets.mean(axis=0))


def test_knn_validates():
    with pytest.raises(ValueError):
        knn_fit(Dataset(np.ones((3, 2)), np.array([0, 1, 0])), k=4)
    model = knn_fit(Dataset(np.ones((3, 2)), np.array([0, 1, 0])), k=1)
    with pytest.raises(ValueError, match="dimension"):
        model.predict(np.ones(5))


# ---------------------------------------------------------------- trees


def dense_best_score(x, targets, min_leaf):
    """Brute-force exhaustive split search over all features/midpoints."""
    n, d = x.shape
    total = targets.sum(axis=0)
    best = None
    for j in range(d):
        values = np.unique(x[:, j])
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            if thr <= a:
                thr = b
            left = x[:, j] < thr
            nl = int(left.sum())
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            sl = targets[left].sum(axis=0)
            sr = total - sl
            score = float((sl * sl).sum()) / nl + float((sr * sr).sum()) / nr
            if best is None or score > best:
                best = score
    parent = float((total * total).sum()) / n
    if best is not None and best - parent <= 1e-12 * (1 + abs(parent)):
        best = None
    return best


def apply_split_score(x, targets, col, thr):
    left = x[:, col] < thr
    nl = int(left.sum())
    nr = len(x) - nl
    sl = targets[left].sum(axis=0)
    sr = targets.sum(axis=0) - sl
    return float((sl * sl).sum()) / nl + float((sr * sr).sum()) / nr


def test_best_split_matches_dense_bruteforce():
    rng = np.random.default_rng(10)
    for trial in range(40):
        n = int(rng.integers(4, 20))
        d = int(rng.integers(1, 7))
        x = rng.choice([-2.0, -0.5, 0.0, 0.0, 0.0, 0.5, 1.0, 3.0], size=(n, d))
        t_dim = int(rng.integers(1, 4))
        targets = rng.random((n, t_dim))
        min_leaf = int(rng.integers(1, 3))
        csr = _Csr.from_dense(x)
        found = _best_split(csr, targets, np.arange(n), min_leaf)
        oracle = dense_best_score(x, targets, min_leaf)
        if oracle is None:
            assert found is None, f"trial {trial}: split found where oracle sees none"
        else:
            assert found is not None, f"trial {trial}: no split found"
            col, thr, _, _ = found
            got = apply_split_score(x, targets, col, thr)
            assert got == pytest.approx(oracle, abs=1e-9), f"trial {trial}"


def test_trees_constant_labels():
    x = np.random.default_rng(0).random((10, 3))
    model = bagged_fit(Dataset(x, np.ones(10, dtype=int)), n_trees=5, seed=1)
    assert (model.predict(np.random.default_rng(1).random((6, 3))) == 1).all()


def test_trees_regression_bounded_by_targets():
    rng = np.random.default_rng(2)
    x = rng.random((30, 4))
    targets = rng.uniform(0.2, 0.8, size=(30, 4))
    model = bagged_fit(Dataset(x, targets), n_trees=10, seed=3)
    preds = model.predict(rng.random((20, 4)))
    assert (preds >= targets.min() - 1e-12).all()
    assert (preds <= targets.max() + 1e-12).all()


def test_trees_separate_two_clusters():
    rng = np.random.default_rng(4)
    center_a, center_b = np.zeros(6), np.full(6, 10.0)
    xa = center_a + rng.normal(0, 0.5, size=(40, 6))
    xb = center_b + rng.normal(0, 0.5, size=(40, 6))
    x = np.vstack([xa, xb])
    y = np.array([0] * 40 + [1] * 40)
    # nearest-cluster oracle confirms the construction is separable
    dist_a = ((x - center_a) ** 2).sum(axis=1)
    dist_b = ((x - center_b) ** 2).sum(axis=1)
    assert np.array_equal((dist_b < dist_a).astype(int), y)
    model = bagged_fit(Dataset(x, y), n_trees=30, seed=5)
    assert (model.predict(x) == y).mean() == 1.0


def test_trees_single_tree_no_bootstrap_deterministic():
    rng = np.random.default_rng(6)
    x = rng.random((25, 5))
    y = rng.integers(0, 2, 25)
    a = bagged_fit(Dataset(x, y), n_trees=1, bootstrap=False, seed=0)
    b = bagged_fit(Dataset(x, y), n_trees=1, bootstrap=False, seed=99)
    queries = rng.random((40, 5))
    assert np.array_equal(a.predict(queries), b.predict(queries))
    tree = a.trees[0]
    # a min_leaf=1 tree grown to purity reproduces its training labels
    assert np.array_equal(a.predict(x), y)
    assert (tree.feature >= -1).all()


def test_trees_deterministic_per_seed():
    rng = np.random.default_rng(7)
    x = rng.random((40, 6))
    y = rng.integers(0, 2, 40)
    queries = rng.random((15, 6))
    a = bagged_fit(Dataset(x, y), n_trees=8, seed=123)
    b = bagged_fit(Dataset(x, y), n_trees=8, seed=123)
    assert np.array_equal(a.predict(queries), b.predict(queries))


def test_trees_validate():
    with pytest.raises(ValueError):
        bagged_fit(Dataset(np.ones((1, 2)), np.array([1])), n_trees=1)
    with pytest.raises(ValueError):
        bagged_fit(Dataset(np.ones((3, 2)), np.array([1, 0, 1])), n_trees=0)


# ---------------------------------------------------------------- svm


def test_svm_two_point_analytic():
    x = np.array([[0.0, 0.0], [2.0, 0.0]])
    y = np.array([0, 1])
    model = svm_fit(Dataset(x, y), c=1e6, gamma=0.5)
    assert model.converged
    assert np.array_equal(model.predict(x), y)
    # by symmetry the decision boundary passes through the midpoint
    assert abs(model.decision(np.array([1.0, 0.0]))) < 1e-6
    assert (np.abs(model.dual_coef) <= 1e6 + 1e-9).all()


def test_svm_xor_with_rbf():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    model = svm_fit(Dataset(x, y), c=10.0, gamma=1.0)
    assert np.array_equal(model.predict(x), y)


def test_svm_training_point_query():
    rng = np.random.default_rng(8)
    x = np.vstack([rng.normal(0, 0.3, (15, 3)), rng.normal(5, 0.3, (15, 3))])
    y = np.array([0] * 15 + [1] * 15)
    model = svm_fit(Dataset(x, y), c=10.0, gamma=0.5)
    assert model.predict(x[3]) == 0
    assert model.predict(x[20]) == 1


def test_svm_dual_coefficients_within_box():
    rng = np.random.default_rng(9)
    x = rng.random((40, 4))
    y = rng.integers(0, 2, 40)
    c = 2.5
    model = svm_fit(Dataset(x, y), c=c, gamma=1.0)
    assert (np.abs(model.dual_coef) <= c + 1e-9).all()


def test_svm_single_class_rejected():
    with pytest.raises(ValueError, match="both classes"):
        svm_fit(Dataset(np.random.default_rng(0).random((5, 2)), np.ones(5, dtype=int)))


def test_svm_non_convergence_flagged_but_returned():
    rng = np.random.default_rng(10)
    x = rng.random((30, 3))
    y = rng.integers(0, 2, 30)
    model = svm_fit(Dataset(x, y), max_iter=1)
    assert not model.converged
    assert model.termination == "max_iter"
    assert model.predict(x).shape == (30,)


# ---------------------------------------------------------------- gp


def gp_oracle(x_train, y_train, queries, ell, sf2, sn):
    """Direct dense solve with per-pair kernel loops."""
    n = len(x_train)
    k = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            d2 = float(((x_train[i] - x_train[j]) ** 2).sum())
            k[i, j] = sf2 * math.exp(-d2 / (2 * ell * ell))
    k += sn * sn * np.eye(n)
    mean = y_train.mean(axis=0)
    alpha = np.linalg.solve(k, y_train - mean)
    out = []
    for q in queries:
        ks = np.array(
            [sf2 * math.exp(-float(((xi - q) ** 2).sum()) / (2 * ell * ell)) for xi in x_train]
        )
        out.append(ks @ alpha + mean)
    return np.array(out)


def test_gp_interpolates_with_tiny_noise():
    rng = np.random.default_rng(11)
    x = rng.uniform(0, 10, size=(5, 2))
    y = rng.random((5, 4))
    model = gp_fit(Dataset(x, y), length_scale=1.0, noise_std=1e-8)
    assert np.allclose(model.predict(x), y, atol=1e-4)


def test_gp_far_query_reverts_to_target_mean():
    rng = np.random.default_rng(12)
    x = rng.random((8, 3))
    y = rng.random((8, 4))
    model = gp_fit(Dataset(x, y), length_scale=1.0)
    far = np.full(3, 1000.0)
    assert np.allclose(model.predict(far), y.mean(axis=0), atol=1e-3)


def test_gp_matches_dense_solve_oracle():
    rng = np.random.default_rng(13)
    for _ in range(20):
        n = int(rng.integers(3, 12))
        d = int(rng.integers(1, 5))
        x = rng.uniform(0, 4, size=(n, d))
        y = rng.random((n, 4))
        ell = float(rng.uniform(0.5, 3.0))
        sn = float(rng.uniform(0.05, 0.3))
        model = gp_fit(Dataset(x, y), length_scale=ell, signal_var=1.0, noise_std=sn)
        queries = rng.uniform(0, 4, size=(3, d))
        assert np.allclose(model.predict(queries), gp_oracle(x, y, queries, ell, 1.0, sn), atol=1e-8)


def test_gp_linear_in_targets():
    rng = np.random.default_rng(14)
    x = rng.random((10, 3))
    y1 = rng.random((10, 4))
    y2 = rng.random((10, 4))
    a, b = 0.7, -1.3
    q = rng.random((4, 3))
    kw = dict(length_scale=1.0, noise_std=0.1)
    p1 = gp_fit(Dataset(x, y1), **kw).predict(q)
    p2 = gp_fit(Dataset(x, y2), **kw).predict(q)
    combo = gp_fit(Dataset(x, a * y1 + b * y2), **kw).predict(q)
    assert np.allclose(combo, a * p1 + b * p2, atol=1e-8)


def test_gp_rejects_non_positive_definite():
    x = np.zeros((4, 2))  # identical rows, zero noise: singular
    y = np.random.default_rng(0).random((4, 4))
    with pytest.raises(ValueError, match="positive definite"):
        gp_fit(Dataset(x, y), noise_std=0.0)


def test_gp_requires_regression_targets():
    with pytest.raises(ValueError):
        gp_fit(Dataset(np.ones((4, 2)), np.array([0, 1, 0, 1])))


# ---------------------------------------------------------------- registry + io


def test_fit_learner_registry():
    rng = np.random.default_rng(15)
    clf = Dataset(rng.random((12, 3)), rng.integers(0, 2, 12))
    reg = Dataset(rng.random((12, 3)), rng.random((12, 4)))
    for name in ("knn", "bagged_trees", "svm"):
        assert fit_learner(name, clf, seed=1).predict(clf.features).shape == (12,)
    for name in ("knn", "bagged_trees", "gp"):
        assert fit_learner(name, reg, seed=1).predict(reg.features).shape == (12, 4)
    with pytest.raises(ValueError, match="unknown learner"):
        fit_learner("mlp", clf)
    with pytest.raises(ValueError, match="does not support"):
        fit_learner("gp", clf)
    with pytest.raises(ValueError, match="does not support"):
        fit_learner("svm", reg)


def test_model_io_roundtrip(tmp_path):
    rng = np.random.default_rng(16)
    clf = Dataset(rng.random((20, 4)), rng.integers(0, 2, 20))
    reg = Dataset(rng.random((20, 4)), rng.random((20, 4)))
    queries = rng.random((7, 4))
    models = [
        fit_learner("knn", clf, k=3),
        fit_learner("bagged_trees", clf, seed=2, n_trees=4),
        fit_learner("svm", clf),
        fit_learner("knn", reg, k=2),
        fit_learner("bagged_trees", reg, seed=2, n_trees=4),
        fit_learner("gp", reg),
    ]
    for i, model in enumerate(models):
        path = save_model(tmp_path / f"m{i}", model)
        loaded = load_model(path)
        assert type(loaded) is type(model)
        assert np.array_equal(np.asarray(model.predict(queries)), np.asarray(loaded.predict(queries)))
