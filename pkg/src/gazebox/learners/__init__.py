"""From-scratch learners over flattened heatmap features.

KNN and bagged trees handle both tasks, the RBF SVM classifies, and the
Gaussian process regresses; `fit_learner` picks by name and task. The
paper's original environment's defaults are not recoverable, so the
package fixes its own, declared here in DEFAULT_HYPERPARAMS.
"""

from __future__ import annotations

from . import gp, knn, svm, trees
from ._common import Dataset
from .gp import GpModel
from .io import load_model, save_model
from .knn import KnnModel
from .svm import SvmModel
from .trees import BaggedTreesModel

knn_fit = knn.fit
bagged_fit = trees.fit
svm_fit = svm.fit
gp_fit = gp.fit

CLASSIFIER_NAMES = ("knn", "bagged_trees", "svm")
REGRESSOR_NAMES = ("knn", "bagged_trees", "gp")

DEFAULT_HYPERPARAMS = {
    "knn": {"k": 1},
    "bagged_trees": {"n_trees": 30},  # min_leaf: 1 classify / 5 regress (fit default)
    "svm": {"c": 1.0, "gamma": None, "tol": 1e-3, "max_iter": 100_000},
    "gp": {"length_scale": None, "signal_var": 1.0, "noise_std": 0.1},
}

# learners whose training cost grows super-quadratically; the evaluation
# harness subsamples their training folds beyond a cap
KERNEL_LEARNERS = ("svm", "gp")

_FITTERS = {"knn": knn.fit, "bagged_trees": trees.fit, "svm": svm.fit, "gp": gp.fit}
_SEEDED = ("bagged_trees",)


def supports(name: str, task: str) -> bool:
    names = CLASSIFIER_NAMES if task == "classify" else REGRESSOR_NAMES
    return name in names


def fit_learner(name: str, data: Dataset, seed: int = 0, **hyper):
    """Fit a learner by name with the package defaults as the base."""
    if name not in _FITTERS:
        raise ValueError(f"unknown learner {name!r}; choose from {sorted(_FITTERS)}")
    if not supports(name, data.task):
        raise ValueError(f"learner {name!r} does not support task {data.task!r}")
    params = dict(DEFAULT_HYPERPARAMS[name])
    params.update(hyper)
    if name in _SEEDED:
        params.setdefault("seed", seed)
    return _FITTERS[name](data, **params)


__all__ = [
    "Dataset",
    "KnnModel",
    "BaggedTreesModel",
    "SvmModel",
    "GpModel",
    "knn_fit",
    "bagged_fit",
    "svm_fit",
    "gp_fit",
    "fit_learner",
    "supports",
    "save_model",
    "load_model",
    "CLASSIFIER_NAMES",
    "REGRESSOR_NAMES",
    "KERNEL_LEARNERS",
    "DEFAULT_HYPERPARAMS",
]
