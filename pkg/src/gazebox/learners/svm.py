"""RBF-kernel support vector classifier trained by sequential minimal
optimization.

The dual problem is solved two multipliers at a time following Platt's
working-set heuristics, with one change: every scan position that Platt
randomizes starts at a counter-derived index instead, so training is
deterministic. The kernel is k(a, b) = exp(-gamma * ||a - b||^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._common import Dataset, as_query_matrix, sq_distances

_MIN_ALPHA = 1e-10


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i per support vector
    bias: float
    gamma: float
    c: float
    converged: bool
    termination: str
    n_updates: int
    _sv_sq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._sv_sq = np.einsum("ij,ij->i", self.support_vectors, self.support_vectors)

    def decision(self, x) -> np.ndarray:
        q, single = as_query_matrix(x, self.support_vectors.shape[1])
        if len(self.support_vectors):
            k = np.exp(-self.gamma * sq_distances(q, self.support_vectors, self._sv_sq))
            f = k @ self.dual_coef + self.bias
        else:
            f = np.full(len(q), self.bias)
        return f[0] if single else f

    def predict(self, x):
        f = self.decision(x)
        return (np.asarray(f) >= 0).astype(np.int64) if np.ndim(f) else int(f >= 0)


def fit(
    data: Dataset,
    c: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_iter: int = 100_000,
) -> SvmModel:
    """Train on binary labels; both classes must be present.

    Terminates when a full pass finds no KKT violation beyond `tol`, or
    after `max_iter` multiplier updates (the model is still returned, with
    `converged=False` and the termination reason recorded).
    """
    if data.task != "classify":
        raise ValueError("SVM training expects binary classification labels")
    labels = data.labels
    if labels.min() == labels.max():
        raise ValueError("SVM training needs both classes present")
    x = data.features
    n, d = x.shape
    if gamma is None:
        gamma = 1.0 / d
    y = labels.astype(np.float64) * 2.0 - 1.0

    gram = np.exp(-gamma * sq_distances(x, x))
    alpha = np.zeros(n)
    state = {"b": 0.0, "updates": 0}
    err = -y.copy()  # E_i = f(x_i) - y_i with f == 0 initially

    def take_step(i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = err[i1], err[i2]
        if y1 == y2:
            lo, hi = max(0.0, a1 + a2 - c), min(c, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(c, c + a2 - a1)
        if lo >= hi:
            return False
        k11, k12, k22 = gram[i1, i1], gram[i1, i2], gram[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta <= 0:
            return False
        a2_new = min(max(a2 + y2 * (e1 - e2) / eta, lo), hi)
        if abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12):
            return False
        a1_new = a1 + y1 * y2 * (a2 - a2_new)
        d1, d2 = y1 * (a1_new - a1), y2 * (a2_new - a2)
        b = state["b"]
        b1 = b - e1 - d1 * k11 - d2 * k12
        b2 = b - e2 - d1 * k12 - d2 * k22
        if 0.0 < a1_new < c:
            b_new = b1
        elif 0.0 < a2_new < c:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0
        err[:] += d1 * gram[i1] + d2 * gram[i2] + (b_new - b)
        alpha[i1], alpha[i2] = a1_new, a2_new
        state["b"] = b_new
        state["updates"] += 1
        return True

    def examine(i2: int) -> bool:
        r2 = err[i2] * y[i2]
        if not ((r2 < -tol and alpha[i2] < c) or (r2 > tol and alpha[i2] > 0)):
            return False
        non_bound = np.flatnonzero((alpha > 0) & (alpha < c))
        if len(non_bound) > 1:
            i1 = int(non_bound[np.argmax(np.abs(err[non_bound] - err[i2]))])
            if take_step(i1, i2):
                return True
        for pool in (non_bound, np.arange(n)):
            if len(pool) == 0:
                continue
            start = state["updates"] % len(pool)
            for i1 in np.roll(pool, -start):
                if take_step(int(i1), i2):
                    return True
        return False

    examine_all = True
    converged = False
    while state["updates"] < max_iter:
        num_changed = 0
        targets = range(n) if examine_all else np.flatnonzero((alpha > 0) & (alpha < c))
        for i2 in targets:
            num_changed += examine(int(i2))
            if state["updates"] >= max_iter:
                break
        if state["updates"] >= max_iter:
            break
        if examine_all:
            if num_changed == 0:
                converged = True
                break
            examine_all = False
        elif num_changed == 0:
            examine_all = True

    sv = np.flatnonzero(alpha > _MIN_ALPHA)
    return SvmModel(
        support_vectors=x[sv].copy(),
        dual_coef=alpha[sv] * y[sv],
        bias=state["b"],
        gamma=gamma,
        c=c,
        converged=converged,
        termination="converged" if converged else "max_iter",
        n_updates=state["updates"],
    )
