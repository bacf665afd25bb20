"""Gaussian-process regression of the four box parameters.

A squared-exponential kernel is shared by four independent posteriors,
one per output, all backed by a single Cholesky factorization of
(K + sigma_n^2 I). Targets are centered before the solve and the mean is
added back at prediction, so queries far from the data revert to the
training-target mean. Only the posterior mean is computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.linalg import solve_triangular

from ._common import Dataset, as_query_matrix, sq_distances


@dataclass
class GpModel:
    features: np.ndarray
    alpha: np.ndarray  # (n, n_outputs) solve of the centered targets
    length_scale: float
    signal_var: float
    noise_std: float
    target_mean: np.ndarray
    _feat_sq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._feat_sq = np.einsum("ij,ij->i", self.features, self.features)

    def predict(self, x) -> np.ndarray:
        q, single = as_query_matrix(x, self.features.shape[1])
        d2 = sq_distances(q, self.features, self._feat_sq)
        k_star = self.signal_var * np.exp(-d2 / (2.0 * self.length_scale**2))
        mean = k_star @ self.alpha + self.target_mean
        return mean[0] if single else mean


def fit(
    data: Dataset,
    length_scale: float | None = None,
    signal_var: float = 1.0,
    noise_std: float = 0.1,
) -> GpModel:
    """Fit the posterior solve factor; raises if the kernel matrix plus
    noise is not positive definite (a sign of bad hyperparameters)."""
    if data.task != "regress":
        raise ValueError("GP training expects regression targets")
    x = data.features
    y = data.labels
    n, d = x.shape
    if length_scale is None:
        length_scale = math.sqrt(d)
    k = signal_var * np.exp(-sq_distances(x, x) / (2.0 * length_scale**2))
    k[np.diag_indices_from(k)] += noise_std**2
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"kernel matrix + noise is not positive definite "
            f"(length_scale={length_scale}, signal_var={signal_var}, "
            f"noise_std={noise_std}): {exc}"
        ) from exc
    target_mean = y.mean(axis=0)
    half = solve_triangular(chol, y - target_mean, lower=True)
    alpha = solve_triangular(chol.T, half, lower=False)
    return GpModel(
        features=x,
        alpha=alpha,
        length_scale=float(length_scale),
        signal_var=float(signal_var),
        noise_std=float(noise_std),
        target_mean=target_mean,
    )
