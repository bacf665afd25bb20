"""Versioned model serialization.

Each model saves to a NumPy .npz archive carrying `format_version`,
`kind`, and the learner's arrays and hyperparameters under documented
keys; `load_model` dispatches on `kind`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..gaze_data import DataError
from .gp import GpModel
from .knn import KnnModel
from .svm import SvmModel
from .trees import BaggedTreesModel, _Tree

FORMAT_VERSION = 1


def _tree_arrays(trees):
    offsets = np.cumsum([0] + [t.feature.size for t in trees])
    return {
        "tree_offsets": offsets.astype(np.int64),
        "tree_feature": np.concatenate([t.feature for t in trees]),
        "tree_threshold": np.concatenate([t.threshold for t in trees]),
        "tree_left": np.concatenate([t.left for t in trees]),
        "tree_right": np.concatenate([t.right for t in trees]),
        "tree_value": np.vstack([t.value for t in trees]),
    }


def _trees_from_arrays(z):
    offsets = z["tree_offsets"]
    trees = []
    for i in range(len(offsets) - 1):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        trees.append(
            _Tree(
                feature=z["tree_feature"][lo:hi],
                threshold=z["tree_threshold"][lo:hi],
                left=z["tree_left"][lo:hi],
                right=z["tree_right"][lo:hi],
                value=z["tree_value"][lo:hi],
            )
        )
    return trees


def save_model(path, model) -> Path:
    """Write a fitted model; returns the path actually written (.npz)."""
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(path.suffix + ".npz")
    common = {"format_version": FORMAT_VERSION}
    if isinstance(model, KnnModel):
        np.savez(
            path,
            kind="knn",
            features=model.features,
            labels=model.labels,
            k=model.k,
            task=model.task,
            **common,
        )
    elif isinstance(model, BaggedTreesModel):
        np.savez(
            path,
            kind="bagged_trees",
            task=model.task,
            n_features=model.n_features,
            min_leaf=model.min_leaf,
            seed=model.seed,
            bootstrap=model.bootstrap,
            **_tree_arrays(model.trees),
            **common,
        )
    elif isinstance(model, SvmModel):
        np.savez(
            path,
            kind="svm",
            support_vectors=model.support_vectors,
            dual_coef=model.dual_coef,
            bias=model.bias,
            gamma=model.gamma,
            c=model.c,
            converged=model.converged,
            termination=model.termination,
            n_updates=model.n_updates,
            **common,
        )
    elif isinstance(model, GpModel):
        np.savez(
            path,
            kind="gp",
            features=model.features,
            alpha=model.alpha,
            length_scale=model.length_scale,
            signal_var=model.signal_var,
            noise_std=model.noise_std,
            target_mean=model.target_mean,
            **common,
        )
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    return path


def load_model(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format version {version}")
        kind = str(z["kind"])
        if kind == "knn":
            return KnnModel(
                features=z["features"],
                labels=z["labels"],
                k=int(z["k"]),
                task=str(z["task"]),
            )
        if kind == "bagged_trees":
            return BaggedTreesModel(
                trees=_trees_from_arrays(z),
                task=str(z["task"]),
                n_features=int(z["n_features"]),
                min_leaf=int(z["min_leaf"]),
                seed=int(z["seed"]),
                bootstrap=bool(z["bootstrap"]),
            )
        if kind == "svm":
            return SvmModel(
                support_vectors=z["support_vectors"],
                dual_coef=z["dual_coef"],
                bias=float(z["bias"]),
                gamma=float(z["gamma"]),
                c=float(z["c"]),
                converged=bool(z["converged"]),
                termination=str(z["termination"]),
                n_updates=int(z["n_updates"]),
            )
        if kind == "gp":
            return GpModel(
                features=z["features"],
                alpha=z["alpha"],
                length_scale=float(z["length_scale"]),
                signal_var=float(z["signal_var"]),
                noise_std=float(z["noise_std"]),
                target_mean=z["target_mean"],
            )
        raise DataError(f"{path}: unknown model kind {kind!r}")
