"""Shared containers and numerics for the learners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """Training data: (n, d) features with binary labels or (n, 4) targets.

    1-D labels mark a classification problem (values in {0, 1}); a 2-D
    array of four box parameters marks regression.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError(f"features must be a nonempty (n, d) matrix, got {feats.shape}")
        if labs.shape[0] != feats.shape[0]:
            raise ValueError("labels length does not match feature rows")
        if labs.ndim == 1:
            if not np.isin(labs, (0, 1)).all():
                raise ValueError("classification labels must be 0 or 1")
            labs = labs.astype(np.int64)
        elif labs.ndim == 2:
            labs = labs.astype(np.float64)
        else:
            raise ValueError(f"labels must be 1-D classes or 2-D targets, got ndim={labs.ndim}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def task(self) -> str:
        return "classify" if self.labels.ndim == 1 else "regress"


def as_query_matrix(x, d: int) -> tuple[np.ndarray, bool]:
    """Coerce a query to (m, d) float64; returns (matrix, was_single_row)."""
    q = np.asarray(x, dtype=np.float64)
    single = q.ndim == 1
    if single:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != d:
        raise ValueError(f"query dimension mismatch: expected d={d}, got shape {q.shape}")
    return q, single


def sq_distances(queries: np.ndarray, points: np.ndarray, points_sq=None) -> np.ndarray:
    """Squared Euclidean distances (m, n) via the norm expansion.

    Uses a matrix product instead of explicit differences so a single
    prediction never materializes an (n, d) temporary.
    """
    if points_sq is None:
        points_sq = np.einsum("ij,ij->i", points, points)
    q_sq = np.einsum("ij,ij->i", queries, queries)
    d = q_sq[:, None] + points_sq[None, :] - 2.0 * (queries @ points.T)
    np.maximum(d, 0.0, out=d)
    return d
