"""K-nearest-neighbor classification and regression.

Stores the training set and answers queries by Euclidean distance.
Classification takes the majority vote of the k nearest points, breaking
vote ties with the label of the single nearest neighbor; regression
averages the k nearest targets. Equal distances rank by training index,
so predictions are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._common import Dataset, as_query_matrix, sq_distances


@dataclass
class KnnModel:
    features: np.ndarray
    labels: np.ndarray
    k: int
    task: str
    _feat_sq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._feat_sq = np.einsum("ij,ij->i", self.features, self.features)

    def neighbors(self, x) -> np.ndarray:
        """Indices of the k nearest training points per query row, (m, k)."""
        q, _ = as_query_matrix(x, self.features.shape[1])
        d = sq_distances(q, self.features, self._feat_sq)
        order = np.argsort(d, axis=1, kind="stable")
        return order[:, : self.k]

    def predict(self, x):
        q, single = as_query_matrix(x, self.features.shape[1])
        nn = self.neighbors(q)
        if self.task == "classify":
            votes = self.labels[nn]
            ones = votes.sum(axis=1)
            zeros = self.k - ones
            out = np.where(ones > zeros, 1, 0)
            ties = ones == zeros
            if ties.any():
                out[ties] = self.labels[nn[ties, 0]]
            out = out.astype(np.int64)
        else:
            out = self.labels[nn].mean(axis=1)
        return out[0] if single else out


def fit(data: Dataset, k: int = 1) -> KnnModel:
    if not 1 <= k <= data.n:
        raise ValueError(f"k must satisfy 1 <= k <= n={data.n}, got {k}")
    return KnnModel(features=data.features, labels=data.labels, k=k, task=data.task)
