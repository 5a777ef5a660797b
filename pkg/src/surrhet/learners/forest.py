"""Honest regression forest.

Each tree is grown on a without-replacement subsample, split greedily by
variance reduction over ``mtry`` random candidate features, and stops at
``min_node_size``. Honesty: the subsample is itself partitioned into a
structure half that chooses the splits and an estimation half whose leaf
means become the predictions; a leaf with no estimation rows inherits the
nearest ancestor's estimation mean.

The split-search inner loop dominates runtime, so it lives in a compiled
kernel (``_forest_cy``) with a bit-identical pure-Python twin
(``_forest_py``) selected at import time. Set SURRHET_FOREST_BACKEND to
``python`` or ``compiled`` to force one side (used by the benchmark and
the equivalence tests).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from surrhet.errors import InsufficientDataError
from surrhet.learners import MODEL_DUMP_FORMAT_VERSION, ForestParams
from surrhet.learners import _forest_py
from surrhet.learners._rng import tree_seeds

try:
    from surrhet.learners import _forest_cy
except ImportError:  # extension not built; pure-Python twin takes over
    _forest_cy = None

HAVE_COMPILED_KERNEL = _forest_cy is not None


def _backend(name: str | None = None):
    name = name or os.environ.get("SURRHET_FOREST_BACKEND", "")
    if name == "python":
        return _forest_py
    if name == "compiled":
        if _forest_cy is None:
            raise RuntimeError("compiled forest kernel requested but not available")
        return _forest_cy
    return _forest_cy if _forest_cy is not None else _forest_py


def active_backend_name() -> str:
    return "compiled" if _backend() is not _forest_py else "python"


def resolve_mtry(mtry: int | str, q: int) -> int:
    if mtry == "auto":
        return min(q, math.ceil(math.sqrt(q)))
    return min(int(mtry), q)


@dataclass(frozen=True)
class ForestModel:
    """Fitted ensemble stored as flat node arrays (see the kernel docs)."""

    feature: np.ndarray
    threshold: np.ndarray
    children_left: np.ndarray
    children_right: np.ndarray
    value: np.ndarray
    tree_offsets: np.ndarray
    n_features: int
    params: ForestParams
    seed: int
    family: str = "forest"

    def __post_init__(self):
        for name in ("feature", "threshold", "children_left", "children_right", "value", "tree_offsets"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_trees(self) -> int:
        return self.tree_offsets.shape[0] - 1

    def predict(self, features, backend: str | None = None) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected features with {self.n_features} columns, got shape {X.shape}"
            )
        return _backend(backend).predict_forest(
            self.feature,
            self.threshold,
            self.children_left,
            self.children_right,
            self.value,
            self.tree_offsets,
            X,
        )

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_DUMP_FORMAT_VERSION,
            "family": "forest",
            "n_features": self.n_features,
            "seed": self.seed,
            "params": {
                "num_trees": self.params.num_trees,
                "mtry": self.params.mtry,
                "min_node_size": self.params.min_node_size,
                "honesty_fraction": self.params.honesty_fraction,
                "subsample_fraction": self.params.subsample_fraction,
            },
            "feature": self.feature.tolist(),
            "threshold": [float(v) for v in self.threshold],
            "children_left": self.children_left.tolist(),
            "children_right": self.children_right.tolist(),
            "value": [float(v) for v in self.value],
            "tree_offsets": self.tree_offsets.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ForestModel":
        p = payload["params"]
        return cls(
            feature=np.array(payload["feature"], dtype=np.int32),
            threshold=np.array(payload["threshold"], dtype=np.float64),
            children_left=np.array(payload["children_left"], dtype=np.int32),
            children_right=np.array(payload["children_right"], dtype=np.int32),
            value=np.array(payload["value"], dtype=np.float64),
            tree_offsets=np.array(payload["tree_offsets"], dtype=np.int64),
            n_features=int(payload["n_features"]),
            params=ForestParams(
                num_trees=int(p["num_trees"]),
                mtry=p["mtry"] if p["mtry"] == "auto" else int(p["mtry"]),
                min_node_size=int(p["min_node_size"]),
                honesty_fraction=float(p["honesty_fraction"]),
                subsample_fraction=float(p["subsample_fraction"]),
            ),
            seed=int(payload["seed"]),
        )


def fit_forest(
    features,
    targets,
    params: ForestParams | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    backend: str | None = None,
) -> ForestModel:
    """Fit an honest forest.

    Randomness is driven by a single root seed: either passed explicitly
    (``seed``, used when tuning is frozen for bootstrap refits) or drawn
    from ``rng``. Per-tree streams derive from the root seed by counter,
    so the result is independent of build order or parallelism.
    """
    if params is None:
        params = ForestParams()
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n, q = X.shape
    if y.shape != (n,):
        raise ValueError(f"targets must have shape ({n},), got {y.shape}")
    if n < max(2, 2 * params.min_node_size):
        raise InsufficientDataError(
            f"need at least {max(2, 2 * params.min_node_size)} rows for the forest, got {n}",
            component="forest",
        )
    if seed is None:
        if rng is None:
            raise ValueError("fit_forest needs either rng or seed")
        seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    seeds = np.array(tree_seeds(seed, params.num_trees), dtype=np.uint64)
    mtry = resolve_mtry(params.mtry, q)
    arrays = _backend(backend).build_forest(
        X,
        y,
        seeds,
        mtry,
        params.min_node_size,
        params.honesty_fraction,
        params.subsample_fraction,
    )
    return ForestModel(
        feature=arrays["feature"],
        threshold=arrays["threshold"],
        children_left=arrays["children_left"],
        children_right=arrays["children_right"],
        value=arrays["value"],
        tree_offsets=arrays["tree_offsets"],
        n_features=q,
        params=params,
        seed=seed,
    )
