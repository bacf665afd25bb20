"""Bagged decision trees for classification and regression.

Each tree is grown on a bootstrap resample with axis-aligned splits. The
split search is exhaustive: every feature, every midpoint between
adjacent distinct values. Classification minimizes Gini impurity and
regression minimizes variance; both reduce to maximizing
sum_d(sum_left_d^2)/n_left + sum_d(sum_right_d^2)/n_right, which is what
the scorer computes (for 0/1 labels that quantity is an affine function
of the weighted Gini).

Heatmap features are mostly zeros, so the rows are kept in a compressed
sparse form and the search enumerates only stored values per node; the
implicit zero block of each column is accounted for analytically wherever
it falls in the sorted order. This keeps a node's cost proportional to
its stored values rather than n * d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import Dataset, as_query_matrix

_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class _Csr:
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_dense(cls, x: np.ndarray) -> "_Csr":
        rows, cols = np.nonzero(x)
        counts = np.bincount(rows, minlength=x.shape[0])
        indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        return cls(indptr, cols.astype(np.int64), x[rows, cols].astype(np.float64))

    def take_rows(self, rows: np.ndarray) -> "_Csr":
        starts = self.indptr[rows]
        lens = self.indptr[rows + 1] - starts
        indptr = np.concatenate(([0], np.cumsum(lens))).astype(np.int64)
        total = int(indptr[-1])
        flat = np.arange(total) - np.repeat(indptr[:-1], lens) + np.repeat(starts, lens)
        return _Csr(indptr, self.indices[flat], self.data[flat])


@dataclass(frozen=True)
class _Tree:
    feature: np.ndarray  # split feature per node, -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs) mean target of the node

    def predict(self, x: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(x), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            live = np.flatnonzero(feat >= 0)
            if live.size == 0:
                return self.value[idx]
            node = idx[live]
            go_left = x[live, feat[live]] < self.threshold[node]
            idx[live] = np.where(go_left, self.left[node], self.right[node])


def _best_split(csr: _Csr, targets: np.ndarray, rows: np.ndarray, min_leaf: int):
    """Best (feature, threshold) for the node given by `rows`, or None.

    Returns (feature, threshold, owner_slice, value_slice) where the two
    slices give the node-local sample positions and values of the chosen
    column, for the caller to partition with.
    """
    n = rows.size
    y_node = targets[rows]
    total_sum = y_node.sum(axis=0)
    parent = float((total_sum * total_sum).sum()) / n

    starts = csr.indptr[rows]
    lens = csr.indptr[rows + 1] - starts
    nnz = int(lens.sum())
    if nnz == 0:
        return None
    offs = np.concatenate(([0], np.cumsum(lens)))
    flat = np.arange(nnz) - np.repeat(offs[:-1], lens) + np.repeat(starts, lens)
    cols = csr.indices[flat]
    vals = csr.data[flat]
    owner = np.repeat(np.arange(n), lens)

    order = np.lexsort((vals, cols))
    cols_s = cols[order]
    vals_s = vals[order]
    owner_s = owner[order]
    y_s = y_node[owner_s]

    new_seg = np.empty(nnz, dtype=bool)
    new_seg[0] = True
    new_seg[1:] = cols_s[1:] != cols_s[:-1]
    seg_starts = np.flatnonzero(new_seg)
    seg_ends = np.append(seg_starts[1:], nnz)
    seg_of = np.cumsum(new_seg) - 1
    seg_col = cols_s[seg_starts]
    m_seg = seg_ends - seg_starts
    z_seg = n - m_seg  # implicit zeros of each column within the node

    t_dim = targets.shape[1]
    csum = np.vstack((np.zeros((1, t_dim)), np.cumsum(y_s, axis=0)))
    seg_sum = csum[seg_ends] - csum[seg_starts]
    zsum_seg = total_sum[None, :] - seg_sum
    cneg = np.concatenate(([0], np.cumsum(vals_s < 0)))
    negc_seg = cneg[seg_ends] - cneg[seg_starts]

    cand_n_left: list[np.ndarray] = []
    cand_sum_left: list[np.ndarray] = []
    cand_thr: list[np.ndarray] = []
    cand_seg: list[np.ndarray] = []

    # boundaries between adjacent distinct stored values of one column;
    # a pair straddling zero is replaced by the two zero-block boundaries
    # below whenever the column actually has implicit zeros
    same_col = cols_s[1:] == cols_s[:-1]
    distinct = vals_s[1:] != vals_s[:-1]
    straddle = (vals_s[:-1] < 0) & (vals_s[1:] > 0) & (z_seg[seg_of[:-1]] > 0)
    qs = np.flatnonzero(same_col & distinct & ~straddle)
    if qs.size:
        seg = seg_of[qs]
        thr = (vals_s[qs] + vals_s[qs + 1]) / 2.0
        collapsed = thr <= vals_s[qs]
        thr[collapsed] = vals_s[qs + 1][collapsed]
        with_zeros = (thr > 0) & (z_seg[seg] > 0)
        n_left = (qs - seg_starts[seg] + 1) + np.where(with_zeros, z_seg[seg], 0)
        sum_left = csum[qs + 1] - csum[seg_starts[seg]]
        sum_left = sum_left + np.where(with_zeros[:, None], zsum_seg[seg], 0.0)
        cand_n_left.append(n_left)
        cand_sum_left.append(sum_left)
        cand_thr.append(thr)
        cand_seg.append(seg)

    # boundary between the largest negative value and the zero block
    has_neg = np.flatnonzero((z_seg > 0) & (negc_seg > 0))
    if has_neg.size:
        q_star = seg_starts[has_neg] + negc_seg[has_neg] - 1
        cand_n_left.append(negc_seg[has_neg])
        cand_sum_left.append(csum[q_star + 1] - csum[seg_starts[has_neg]])
        cand_thr.append(vals_s[q_star] / 2.0)
        cand_seg.append(has_neg)

    # boundary between the zero block and the smallest positive value
    has_pos = np.flatnonzero((z_seg > 0) & (negc_seg < m_seg))
    if has_pos.size:
        q_pos = seg_starts[has_pos] + negc_seg[has_pos]
        neg_sum = csum[q_pos] - csum[seg_starts[has_pos]]
        cand_n_left.append(negc_seg[has_pos] + z_seg[has_pos])
        cand_sum_left.append(neg_sum + zsum_seg[has_pos])
        cand_thr.append(vals_s[q_pos] / 2.0)
        cand_seg.append(has_pos)

    if not cand_n_left:
        return None
    n_left = np.concatenate(cand_n_left).astype(np.float64)
    sum_left = np.vstack(cand_sum_left)
    thr = np.concatenate(cand_thr)
    seg_id = np.concatenate(cand_seg)

    n_right = n - n_left
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    sum_right = total_sum[None, :] - sum_left
    score = (sum_left * sum_left).sum(axis=1) / np.maximum(n_left, 1) + (
        sum_right * sum_right
    ).sum(axis=1) / np.maximum(n_right, 1)
    score[~valid] = -np.inf
    best = int(np.argmax(score))
    if score[best] - parent <= _GAIN_EPS * (1.0 + abs(parent)):
        return None
    seg = int(seg_id[best])
    sl = slice(int(seg_starts[seg]), int(seg_ends[seg]))
    return int(seg_col[seg]), float(thr[best]), owner_s[sl], vals_s[sl]


def _grow_tree(csr: _Csr, targets: np.ndarray, min_leaf: int, max_depth):
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[np.ndarray] = []

    def new_node(rows: np.ndarray) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(targets[rows].mean(axis=0))
        return node

    root_rows = np.arange(csr.indptr.size - 1, dtype=np.int64)
    stack = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if rows.size < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        found = _best_split(csr, targets, rows, min_leaf)
        if found is None:
            continue
        feat, thr, owners, vals = found
        col_vals = np.zeros(rows.size)
        col_vals[owners] = vals
        go_left = col_vals < thr
        feature[node] = feat
        threshold[node] = thr
        left_rows, right_rows = rows[go_left], rows[~go_left]
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((left[node], left_rows, depth + 1))
        stack.append((right[node], right_rows, depth + 1))

    return _Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.vstack(value),
    )


@dataclass
class BaggedTreesModel:
    trees: list[_Tree]
    task: str
    n_features: int
    min_leaf: int
    seed: int
    bootstrap: bool

    def predict(self, x):
        q, single = as_query_matrix(x, self.n_features)
        per_tree = np.stack([tree.predict(q) for tree in self.trees])  # (trees, m, t)
        if self.task == "classify":
            votes = (per_tree[:, :, 0] >= 0.5).mean(axis=0)
            out = (votes >= 0.5).astype(np.int64)  # even-split vote ties go to class 1
        else:
            out = per_tree.mean(axis=0)
        return out[0] if single else out


def fit(
    data: Dataset,
    n_trees: int = 30,
    min_leaf: int | None = None,
    seed: int = 0,
    bootstrap: bool = True,
    max_depth: int | None = None,
) -> BaggedTreesModel:
    """Grow `n_trees` trees on bootstrap resamples, deterministic per seed.

    `min_leaf` defaults to 1 for classification and 5 for regression.
    `bootstrap=False` trains every tree on the full sample (test mode:
    with n_trees=1 this reproduces a single deterministic tree).
    """
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    if data.n < 2:
        raise ValueError("need at least 2 samples to grow a tree")
    if min_leaf is None:
        min_leaf = 1 if data.task == "classify" else 5
    if min_leaf < 1:
        raise ValueError(f"min_leaf must be >= 1, got {min_leaf}")
    targets = (
        data.labels[:, None].astype(np.float64) if data.task == "classify" else data.labels
    )
    csr = _Csr.from_dense(data.features)
    trees = []
    for tree_idx in range(n_trees):
        if bootstrap:
            rng = np.random.default_rng([seed, tree_idx])
            rows = rng.integers(0, data.n, size=data.n)
            tree_csr = csr.take_rows(rows)
            tree_targets = targets[rows]
        else:
            tree_csr, tree_targets = csr, targets
        trees.append(_grow_tree(tree_csr, tree_targets, min_leaf, max_depth))
    return BaggedTreesModel(
        trees=trees,
        task=data.task,
        n_features=data.d,
        min_leaf=min_leaf,
        seed=seed,
        bootstrap=bootstrap,
    )
