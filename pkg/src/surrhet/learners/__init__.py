"""Interchangeable base-learner families behind a single fit/predict contract.

Three families are provided: ordinary least squares with an intercept
(``linear``), an additive penalized-spline model with GCV-selected
smoothing (``gam``), and an honest regression forest (``forest``). Every
fitted model exposes ``predict(features)``, ``n_features``, ``family`` and
a JSON-able ``to_dict()``/``from_dict()`` pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("linear", "gam", "forest")

MODEL_DUMP_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GamParams:
    """Additive-spline settings: per-covariate basis size and the smoothing grid."""

    basis_size: int = 10
    lambda_grid: tuple[float, ...] = tuple(np.geomspace(1e-4, 1e4, 20))

    def __post_init__(self):
        if self.basis_size < 5:
            raise ValueError("basis_size must be at least 5 (cubic splines need >= 5 functions)")
        grid = tuple(float(v) for v in self.lambda_grid)
        if not grid:
            raise ValueError("lambda_grid must be non-empty")
        if any(v <= 0 for v in grid):
            raise ValueError("lambda_grid entries must be strictly positive")
        if any(grid[i] >= grid[i + 1] for i in range(len(grid) - 1)):
            raise ValueError("lambda_grid must be sorted strictly ascending")
        object.__setattr__(self, "lambda_grid", grid)


@dataclass(frozen=True)
class ForestParams:
    """Honest-forest settings; ``mtry='auto'`` means ceil(sqrt(q))."""

    num_trees: int = 2000
    mtry: int | str = "auto"
    min_node_size: int = 5
    honesty_fraction: float = 0.5
    subsample_fraction: float = 0.5

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.mtry != "auto" and (not isinstance(self.mtry, int) or self.mtry < 1):
            raise ValueError("mtry must be 'auto' or a positive integer")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if not 0.0 < self.honesty_fraction < 1.0:
            raise ValueError("honesty_fraction must be in (0, 1)")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must be in (0, 1]")


@dataclass(frozen=True)
class LearnerSpec:
    """Which base-learner family to use, plus its hyperparameters."""

    family: str = "linear"
    gam_params: GamParams = field(default_factory=GamParams)
    forest_params: ForestParams = field(default_factory=ForestParams)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown learner family {self.family!r}; expected one of {FAMILIES}")


def fit_learner(features, targets, spec: LearnerSpec, rng=None, frozen=None):
    """Fit one model of the family selected by ``spec``.

    ``frozen`` optionally pins tuning chosen on an earlier fit (the GAM
    smoothing parameter, the forest seed) so that refits on resampled data
    reuse it instead of re-tuning.
    """
    from surrhet.learners.forest import fit_forest
    from surrhet.learners.gam import fit_gam
    from surrhet.learners.linear import fit_linear

    if spec.family == "linear":
        return fit_linear(features, targets)
    if spec.family == "gam":
        lam = None if frozen is None else frozen.get("gam_lambda")
        return fit_gam(features, targets, spec.gam_params, lam=lam)
    seed = None if frozen is None else frozen.get("forest_seed")
    return fit_forest(features, targets, spec.forest_params, rng=rng, seed=seed)


def model_from_dict(payload: dict):
    """Rebuild any fitted learner from its ``to_dict()`` payload."""
    from surrhet.learners.forest import ForestModel
    from surrhet.learners.gam import GamModel
    from surrhet.learners.linear import LinearModel

    version = payload.get("format_version")
    if version != MODEL_DUMP_FORMAT_VERSION:
        raise ValueError(f"unsupported model dump format_version: {version!r}")
    family = payload.get("family")
    cls = {"linear": LinearModel, "gam": GamModel, "forest": ForestModel}.get(family)
    if cls is None:
        raise ValueError(f"unknown model family in dump: {family!r}")
    return cls.from_dict(payload)


__all__ = [
    "FAMILIES",
    "MODEL_DUMP_FORMAT_VERSION",
    "ForestParams",
    "GamParams",
    "LearnerSpec",
    "fit_learner",
    "model_from_dict",
]
