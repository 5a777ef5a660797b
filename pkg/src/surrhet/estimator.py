"""Five-learner T-learner fit and the plug-in effect estimates.

Fits, on the training split:

* ``lambda0``, ``lambda1`` - outcome given covariates, per group;
* ``mu0``, ``mu1`` - outcome given (surrogate, covariates), per group,
  with the surrogate always the first feature column;
* ``zeta0`` - surrogate given covariates, control group only.

At a test point x the treatment effect is delta(x) = lambda1(x) -
lambda0(x); the residual effect plugs the predicted control surrogate
mean into both mu models, delta_s(x) = mu1(zeta0(x), x) - mu0(zeta0(x),
x); and the explained fraction is r_s(x) = 1 - delta_s(x)/delta(x),
reported only where |delta(x)| clears a floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from surrhet.data import Dataset
from surrhet.errors import InsufficientDataError
from surrhet.learners import LearnerSpec, fit_learner

__all__ = [
    "FittedSurrogateModel",
    "PteEstimates",
    "ZetaDiagnostic",
    "estimate_pte",
    "fit_tlearner",
    "zeta_diagnostic",
]

_COMPONENTS = ("lambda0", "lambda1", "mu0", "mu1", "zeta0")


@dataclass(frozen=True)
class FittedSurrogateModel:
    """The five fitted learners plus the tuning frozen for bootstrap refits."""

    lambda0: object
    lambda1: object
    mu0: object
    mu1: object
    zeta0: object
    spec: LearnerSpec
    frozen: dict
    y_sd: float
    n_covariates: int

    @property
    def default_delta_floor(self) -> float:
        # guards r_s against a vanishing denominator; the estimand itself
        # assumes delta(x) != 0 everywhere
        return 1e-6 * self.y_sd


@dataclass(frozen=True)
class PteEstimates:
    """Per-test-row effect estimates; r_s is NaN exactly where valid is False."""

    delta: np.ndarray
    delta_s: np.ndarray
    r_s: np.ndarray
    zeta0_hat: np.ndarray
    valid: np.ndarray
    delta_floor: float

    def __post_init__(self):
        for name in ("delta", "delta_s", "r_s", "zeta0_hat", "valid"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class ZetaDiagnostic:
    """Observed-vs-predicted control surrogate comparison (model misfit screen)."""

    ks_statistic: float
    n: int
    decile_table: tuple = field(default_factory=tuple)


def _group_slices(train: Dataset):
    mask0 = train.group_mask(0)
    mask1 = train.group_mask(1)
    return mask0, mask1


def fit_tlearner(train: Dataset, spec: LearnerSpec, rng: np.random.Generator | None = None) -> FittedSurrogateModel:
    """Fit all five component learners on the training split.

    The returned model records the tuning selected here (GAM smoothing
    parameters, forest seeds) so later refits reuse it unchanged.
    """
    mask0, mask1 = _group_slices(train)
    n0 = int(mask0.sum())
    n1 = int(mask1.sum())
    if n0 == 0:
        raise InsufficientDataError(
            "control group empty; cannot fit lambda0/mu0/zeta0", component="lambda0/mu0/zeta0"
        )
    if n1 == 0:
        raise InsufficientDataError(
            "treated group empty; cannot fit lambda1/mu1", component="lambda1/mu1"
        )
    sx = np.column_stack([train.s, train.x])  # surrogate enters first

    fits = {}
    frozen: dict[str, dict] = {}
    for name, (mask, features, targets) in {
        "lambda0": (mask0, train.x, train.y),
        "lambda1": (mask1, train.x, train.y),
        "mu0": (mask0, sx, train.y),
        "mu1": (mask1, sx, train.y),
        "zeta0": (mask0, train.x, train.s),
    }.items():
        try:
            model = fit_learner(features[mask], targets[mask], spec, rng=rng)
        except InsufficientDataError as exc:
            raise InsufficientDataError(f"{name}: {exc}", component=name) from exc
        fits[name] = model
        record: dict = {"family": spec.family}
        if spec.family == "gam":
            record["gam_lambda"] = float(model.lam)
        elif spec.family == "forest":
            record["forest_seed"] = int(model.seed)
        frozen[name] = record

    return FittedSurrogateModel(
        lambda0=fits["lambda0"],
        lambda1=fits["lambda1"],
        mu0=fits["mu0"],
        mu1=fits["mu1"],
        zeta0=fits["zeta0"],
        spec=spec,
        frozen=frozen,
        y_sd=float(np.std(train.y)),
        n_covariates=train.p,
    )


def refit_tlearner(train: Dataset, spec: LearnerSpec, frozen: dict) -> FittedSurrogateModel:
    """Refit all five learners on (resampled) data with tuning pinned."""
    mask0, mask1 = _group_slices(train)
    sx = np.column_stack([train.s, train.x])
    fits = {}
    for name, (mask, features, targets) in {
        "lambda0": (mask0, train.x, train.y),
        "lambda1": (mask1, train.x, train.y),
        "mu0": (mask0, sx, train.y),
        "mu1": (mask1, sx, train.y),
        "zeta0": (mask0, train.x, train.s),
    }.items():
        try:
            fits[name] = fit_learner(features[mask], targets[mask], spec, frozen=frozen.get(name))
        except InsufficientDataError as exc:
            raise InsufficientDataError(f"{name}: {exc}", component=name) from exc
    return FittedSurrogateModel(
        lambda0=fits["lambda0"],
        lambda1=fits["lambda1"],
        mu0=fits["mu0"],
        mu1=fits["mu1"],
        zeta0=fits["zeta0"],
        spec=spec,
        frozen=frozen,
        y_sd=float(np.std(train.y)),
        n_covariates=train.p,
    )


def estimate_pte(model: FittedSurrogateModel, test_x, delta_floor: float | None = None) -> PteEstimates:
    """Plug-in estimates at each test covariate row.

    The control surrogate mean zeta0(x) is predicted for every row (both
    groups); rows where |delta| falls below the floor are flagged invalid
    and get r_s = NaN rather than an exploding ratio.
    """
    X = np.asarray(test_x, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_covariates:
        raise ValueError(
            f"expected test covariates with {model.n_covariates} columns, got shape {X.shape}"
        )
    if delta_floor is None:
        delta_floor = model.default_delta_floor
    if delta_floor <= 0:
        raise ValueError("delta_floor must be positive")

    delta = model.lambda1.predict(X) - model.lambda0.predict(X)
    zeta0_hat = model.zeta0.predict(X)
    sx = np.column_stack([zeta0_hat, X])
    delta_s = model.mu1.predict(sx) - model.mu0.predict(sx)
    valid = np.abs(delta) >= delta_floor
    ratio = np.divide(delta_s, delta, out=np.full(X.shape[0], np.nan), where=valid)
    r_s = 1.0 - ratio
    return PteEstimates(
        delta=delta,
        delta_s=delta_s,
        r_s=r_s,
        zeta0_hat=zeta0_hat,
        valid=valid,
        delta_floor=float(delta_floor),
    )


def _ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Max absolute distance between the two empirical CDFs."""
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.shape[0]
    cdf_b = np.searchsorted(b, grid, side="right") / b.shape[0]
    return float(np.abs(cdf_a - cdf_b).max())


def zeta_diagnostic(model: FittedSurrogateModel, control: Dataset, n_bins: int = 10) -> ZetaDiagnostic:
    """Compare observed control surrogates with their model predictions.

    Returns the two-sample Kolmogorov-Smirnov statistic between the
    observed values and the predictions, plus a per-decile (of the
    predictions) mean comparison. A small statistic says the control
    surrogate model can stand in for the raw observations.
    """
    if control.n == 0:
        raise ValueError("control dataset is empty")
    if not (control.g == 0).all():
        raise ValueError("zeta_diagnostic expects control rows only (g == 0)")
    observed = control.s
    predicted = model.zeta0.predict(control.x)
    ks = _ks_two_sample(observed, predicted)

    edges = np.quantile(predicted, np.linspace(0, 1, n_bins + 1))
    table = []
    for b in range(n_bins):
        lo, hi = edges[b], edges[b + 1]
        if b < n_bins - 1:
            mask = (predicted >= lo) & (predicted < hi)
        else:
            mask = (predicted >= lo) & (predicted <= hi)
        if not mask.any():
            continue
        table.append(
            {
                "decile": b + 1,
                "n": int(mask.sum()),
                "predicted_mean": float(predicted[mask].mean()),
                "observed_mean": float(observed[mask].mean()),
            }
        )
    return ZetaDiagnostic(ks_statistic=ks, n=control.n, decile_table=tuple(table))
