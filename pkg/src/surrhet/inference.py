"""Bootstrap inference and the individual identification test.

The nonparametric bootstrap resamples the pooled training rows with
replacement, refits all five learners with tuning frozen at the original
fit, and re-evaluates the effect estimates on the fixed test covariates.
Confidence intervals are percentile intervals of the replicate
distributions. The per-individual test counts the fraction of replicates
at or below the strength threshold kappa and applies the
Benjamini-Hochberg step-up adjustment across the test rows.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from surrhet.data import Dataset
from surrhet.errors import DataValidationError
from surrhet.estimator import FittedSurrogateModel, estimate_pte, refit_tlearner
from surrhet.learners import LearnerSpec

__all__ = [
    "BootstrapDistribution",
    "ConfusionMetrics",
    "IdentificationResult",
    "IntervalSet",
    "bh_adjust",
    "bootstrap_pte",
    "confusion_metrics",
    "identify",
    "percentile_ci",
]

_MAX_REDRAWS_PER_REPLICATE = 100


@dataclass(frozen=True)
class BootstrapDistribution:
    """Replicate estimates over a fixed test set: arrays of shape (B, m)."""

    delta: np.ndarray
    delta_s: np.ndarray
    r_s: np.ndarray
    valid: np.ndarray
    frozen: dict
    redraws: int

    def __post_init__(self):
        for name in ("delta", "delta_s", "r_s", "valid"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_replicates(self) -> int:
        return self.delta.shape[0]

    @property
    def num_rows(self) -> int:
        return self.delta.shape[1]


@dataclass(frozen=True)
class IntervalSet:
    """Per-row percentile interval plus how many replicates backed it."""

    lower: np.ndarray
    upper: np.ndarray
    n_valid: np.ndarray
    low_support: np.ndarray  # fewer than half the replicates were usable


@dataclass(frozen=True)
class IdentificationResult:
    """Per-row strength test: raw and adjusted replicate fractions, decision."""

    p_raw: np.ndarray
    p_adjusted: np.ndarray
    strong: np.ndarray
    kappa: float
    alpha: float


@dataclass(frozen=True)
class ConfusionMetrics:
    """PPV/NPV/specificity/sensitivity; None where the denominator is empty."""

    ppv: float | None
    npv: float | None
    specificity: float | None
    sensitivity: float | None
    tp: int
    fp: int
    tn: int
    fn: int


def _one_replicate(train: Dataset, test_x, spec, frozen, delta_floor, seed_seq):
    """Resample, refit with frozen tuning, re-estimate. Returns arrays + redraw count."""
    rng = np.random.default_rng(seed_seq)
    n = train.n
    redraws = 0
    while True:
        idx = rng.integers(0, n, size=n)
        g = train.g[idx]
        if (g == 0).any() and (g == 1).any():
            break
        redraws += 1
        if redraws > _MAX_REDRAWS_PER_REPLICATE:
            raise DataValidationError(
                "bootstrap resample kept producing an empty treatment group"
            )
    resampled = train.subset(idx)
    model = refit_tlearner(resampled, spec, frozen)
    est = estimate_pte(model, test_x, delta_floor=delta_floor)
    return est.delta, est.delta_s, est.r_s, est.valid, redraws


def bootstrap_pte(
    train: Dataset,
    test_x,
    spec: LearnerSpec,
    frozen: dict,
    B: int,
    rng: np.random.Generator,
    delta_floor: float | None = None,
    workers: int = 1,
) -> BootstrapDistribution:
    """Nonparametric bootstrap of the effect estimates.

    Each replicate draws its own child stream from ``rng`` up front, so
    results are identical for any ``workers`` value or execution order.
    Resamples that lose an entire treatment arm are redrawn (bounded);
    the total redraw count is reported on the result.

    ``frozen`` must be the tuning record produced by ``fit_tlearner`` on
    the same training set; replicates never re-tune.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    test_x = np.asarray(test_x, dtype=np.float64)
    if delta_floor is None:
        delta_floor = 1e-6 * float(np.std(train.y))
    child_seeds = rng.bit_generator.seed_seq.spawn(B)

    jobs = [(train, test_x, spec, frozen, delta_floor, child_seeds[b]) for b in range(B)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_star, jobs, chunksize=max(1, B // (4 * workers))))
    else:
        results = [_replicate_star(job) for job in jobs]

    m = test_x.shape[0]
    delta = np.empty((B, m))
    delta_s = np.empty((B, m))
    r_s = np.empty((B, m))
    valid = np.empty((B, m), dtype=bool)
    redraws = 0
    for b, (d, ds, rs, va, rd) in enumerate(results):
        delta[b] = d
        delta_s[b] = ds
        r_s[b] = rs
        valid[b] = va
        redraws += rd
    return BootstrapDistribution(
        delta=delta, delta_s=delta_s, r_s=r_s, valid=valid, frozen=frozen, redraws=redraws
    )


def _replicate_star(args):
    return _one_replicate(*args)


def _column_quantiles(values: np.ndarray, valid: np.ndarray, probs) -> tuple[np.ndarray, ...]:
    """Per-column quantiles over valid entries (linear interpolation)."""
    B, m = values.shape
    out = [np.full(m, np.nan) for _ in probs]
    n_valid = valid.sum(axis=0)
    for j in range(m):
        if n_valid[j] == 0:
            continue
        col = values[valid[:, j], j]
        qs = np.quantile(col, probs)
        for k in range(len(probs)):
            out[k][j] = qs[k]
    return (*out, n_valid)


def percentile_ci(dist: BootstrapDistribution, alpha: float) -> dict[str, IntervalSet]:
    """Percentile intervals for delta, delta_s and r_s.

    Bounds are the alpha/2 and 1-alpha/2 empirical quantiles of the valid
    replicates per row (linear interpolation between order statistics).
    Rows where fewer than half the replicates were valid are flagged;
    rows with none are left undefined (NaN bounds).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    probs = (alpha / 2.0, 1.0 - alpha / 2.0)
    out = {}
    for name, values in (("delta", dist.delta), ("delta_s", dist.delta_s), ("r_s", dist.r_s)):
        lower, upper, n_valid = _column_quantiles(values, dist.valid, probs)
        out[name] = IntervalSet(
            lower=lower,
            upper=upper,
            n_valid=n_valid,
            low_support=n_valid < dist.num_replicates / 2.0,
        )
    return out


def bootstrap_sd(dist: BootstrapDistribution) -> np.ndarray:
    """Per-row standard deviation of the valid r_s replicates."""
    B, m = dist.r_s.shape
    out = np.full(m, np.nan)
    for j in range(m):
        col = dist.r_s[dist.valid[:, j], j]
        if col.shape[0] >= 2:
            out[j] = float(np.std(col, ddof=1))
    return out


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted values.

    Ascending order statistics p_(k) map to min over j >= k of
    m * p_(j) / j, capped at 1, returned in the original order.
    """
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("p_values must be a 1-D vector")
    if p.size == 0:
        return p.copy()
    if np.any((p < 0) | (p > 1) | ~np.isfinite(p)):
        raise ValueError("p_values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.minimum(adjusted, 1.0)
    out = np.empty(m)
    out[order] = adjusted
    return out


def identify(dist: BootstrapDistribution, kappa: float, alpha: float) -> IdentificationResult:
    """Per-row surrogate-sufficiency test at threshold kappa.

    p_raw is the fraction of valid replicates with r_s <= kappa (small
    when the replicate mass sits above the threshold). Rows without any
    valid replicate are excluded from the adjustment family and never
    declared strong.
    """
    if not np.isfinite(kappa):
        raise ValueError("kappa must be finite")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    B, m = dist.r_s.shape
    p_raw = np.full(m, np.nan)
    for j in range(m):
        col = dist.r_s[dist.valid[:, j], j]
        if col.shape[0] > 0:
            p_raw[j] = float(np.count_nonzero(col <= kappa)) / col.shape[0]
    defined = np.isfinite(p_raw)
    p_adjusted = np.full(m, np.nan)
    if defined.any():
        p_adjusted[defined] = bh_adjust(p_raw[defined])
    strong = np.zeros(m, dtype=bool)
    strong[defined] = p_adjusted[defined] < alpha
    return IdentificationResult(
        p_raw=p_raw, p_adjusted=p_adjusted, strong=strong, kappa=float(kappa), alpha=float(alpha)
    )


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def confusion_metrics(decisions, truth) -> ConfusionMetrics:
    """Standard confusion ratios; empty denominators give None, never 0/0."""
    d = np.asarray(decisions, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if d.shape != t.shape:
        raise ValueError(f"decisions {d.shape} and truth {t.shape} must have equal length")
    tp = int(np.count_nonzero(d & t))
    fp = int(np.count_nonzero(d & ~t))
    tn = int(np.count_nonzero(~d & ~t))
    fn = int(np.count_nonzero(~d & t))
    return ConfusionMetrics(
        ppv=_ratio(tp, tp + fp),
        npv=_ratio(tn, tn + fn),
        specificity=_ratio(tn, tn + fp),
        sensitivity=_ratio(tp, tp + fn),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )
