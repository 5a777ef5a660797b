"""Additive penalized-spline model with GCV-selected smoothing.

Each covariate gets a cubic B-spline expansion on uniform knots extended
beyond the observed range, penalized by squared second differences of the
coefficients. Uniform knots make straight lines live exactly in the
penalty null space, so linear signals are never shrunk. One smoothing
parameter lambda is shared across all terms and chosen by minimizing

    GCV(lambda) = n * RSS(lambda) / (n - tr(H(lambda)))**2

over a fixed grid, where H is the penalized hat matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import cho_factor, cho_solve

from surrhet.errors import FitError, InsufficientDataError
from surrhet.learners import MODEL_DUMP_FORMAT_VERSION, GamParams

_DEGREE = 3


def _knots(lo: float, hi: float, basis_size: int) -> np.ndarray:
    """Uniform extended knot vector giving ``basis_size`` B-splines on [lo, hi]."""
    nseg = basis_size - _DEGREE
    if hi <= lo:  # constant feature: any non-degenerate interval works
        hi = lo + 1.0
    h = (hi - lo) / nseg
    interior = np.linspace(lo, hi, nseg + 1)
    left = lo - h * np.arange(_DEGREE, 0, -1)
    right = hi + h * np.arange(1, _DEGREE + 1)
    return np.concatenate([left, interior, right])


def _basis(values: np.ndarray, knots: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # values outside the training range are clamped (flat extrapolation)
    clamped = np.clip(values, lo, hi)
    return BSpline.design_matrix(clamped, knots, _DEGREE).toarray()


@dataclass(frozen=True)
class GamTerm:
    """Per-covariate basis description: knots, range and centering means."""

    knots: np.ndarray
    lo: float
    hi: float
    col_means: np.ndarray


@dataclass(frozen=True)
class GamModel:
    """Fitted additive spline model.

    ``coef`` holds the intercept followed by ``kept`` coefficients per
    covariate block (one basis function per block is dropped to remove the
    centering degeneracy). ``gcv_grid``/``gcv_values``/``edf_values``
    record the full selection path so the choice can be re-audited.
    """

    coef: np.ndarray
    terms: tuple[GamTerm, ...]
    basis_size: int
    kept: int
    lam: float
    gcv: float
    edf: float
    gcv_grid: tuple[float, ...]
    gcv_values: tuple[float, ...]
    edf_values: tuple[float, ...]
    family: str = "gam"

    @property
    def n_features(self) -> int:
        return len(self.terms)

    def _design(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        out = np.empty((n, 1 + self.kept * len(self.terms)), dtype=np.float64)
        out[:, 0] = 1.0
        for j, term in enumerate(self.terms):
            B = _basis(X[:, j], term.knots, term.lo, term.hi)
            out[:, 1 + j * self.kept : 1 + (j + 1) * self.kept] = (B - term.col_means)[:, : self.kept]
        return out

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected features with {self.n_features} columns, got shape {X.shape}"
            )
        return self._design(X) @ self.coef

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_DUMP_FORMAT_VERSION,
            "family": "gam",
            "coef": [float(v) for v in self.coef],
            "basis_size": self.basis_size,
            "kept": self.kept,
            "lam": float(self.lam),
            "gcv": float(self.gcv),
            "edf": float(self.edf),
            "gcv_grid": [float(v) for v in self.gcv_grid],
            "gcv_values": [float(v) for v in self.gcv_values],
            "edf_values": [float(v) for v in self.edf_values],
            "terms": [
                {
                    "knots": [float(v) for v in t.knots],
                    "lo": float(t.lo),
                    "hi": float(t.hi),
                    "col_means": [float(v) for v in t.col_means],
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GamModel":
        terms = tuple(
            GamTerm(
                knots=np.array(t["knots"], dtype=np.float64),
                lo=float(t["lo"]),
                hi=float(t["hi"]),
                col_means=np.array(t["col_means"], dtype=np.float64),
            )
            for t in payload["terms"]
        )
        return cls(
            coef=np.array(payload["coef"], dtype=np.float64),
            terms=terms,
            basis_size=int(payload["basis_size"]),
            kept=int(payload["kept"]),
            lam=float(payload["lam"]),
            gcv=float(payload["gcv"]),
            edf=float(payload["edf"]),
            gcv_grid=tuple(payload["gcv_grid"]),
            gcv_values=tuple(payload["gcv_values"]),
            edf_values=tuple(payload["edf_values"]),
        )


def _penalty_block(basis_size: int, kept: int) -> np.ndarray:
    D = np.diff(np.eye(basis_size), 2, axis=0)
    return (D.T @ D)[:kept, :kept]


def fit_gam(features, targets, params: GamParams | None = None, lam: float | None = None) -> GamModel:
    """Fit the additive spline model, selecting lambda by GCV.

    Parameters
    ----------
    features, targets : arrays of shape (n, q) and (n,)
    params : GamParams
        Basis size per covariate and the lambda grid.
    lam : float, optional
        Skip selection and fit at this lambda (used when tuning is frozen,
        e.g. inside bootstrap refits).

    Raises
    ------
    InsufficientDataError
        If the total basis dimension reaches n.
    FitError
        If the penalized system is singular at every candidate lambda.
    """
    if params is None:
        params = GamParams()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n, q = X.shape
    if q == 0:
        raise ValueError("need at least one feature column")
    if y.shape != (n,):
        raise ValueError(f"targets must have shape ({n},), got {y.shape}")

    k = params.basis_size
    kept = k - 1  # one column per block is redundant after centering
    dim = 1 + kept * q
    if dim >= n:
        raise InsufficientDataError(
            f"basis dimension {dim} must be below the row count {n}", component="gam"
        )

    terms = []
    design = np.empty((n, dim), dtype=np.float64)
    design[:, 0] = 1.0
    for j in range(q):
        lo = float(X[:, j].min())
        hi = float(X[:, j].max())
        knots = _knots(lo, hi, k)
        B = _basis(X[:, j], knots, lo, hi)
        col_means = B.mean(axis=0)
        design[:, 1 + j * kept : 1 + (j + 1) * kept] = (B - col_means)[:, :kept]
        terms.append(GamTerm(knots=knots, lo=lo, hi=hi, col_means=col_means))

    penalty = np.zeros((dim, dim), dtype=np.float64)
    block = _penalty_block(k, kept)
    for j in range(q):
        off = 1 + j * kept
        penalty[off : off + kept, off : off + kept] = block

    A = design.T @ design
    Aty = design.T @ y
    grid = (float(lam),) if lam is not None else params.lambda_grid

    best = None
    gcv_values, edf_values = [], []
    for lam_j in grid:
        try:
            factor = cho_factor(A + lam_j * penalty, lower=True)
        except np.linalg.LinAlgError:
            gcv_values.append(float("nan"))
            edf_values.append(float("nan"))
            continue
        beta = cho_solve(factor, Aty)
        residuals = y - design @ beta
        rss = float(residuals @ residuals)
        edf = float(np.trace(cho_solve(factor, A)))
        gcv = n * rss / (n - edf) ** 2
        gcv_values.append(gcv)
        edf_values.append(edf)
        if best is None or gcv < best[0]:
            best = (gcv, lam_j, beta, edf)

    if best is None:
        raise FitError("penalized system singular at every lambda on the grid")
    gcv, lam_sel, beta, edf = best
    return GamModel(
        coef=beta,
        terms=tuple(terms),
        basis_size=k,
        kept=kept,
        lam=lam_sel,
        gcv=gcv,
        edf=edf,
        gcv_grid=tuple(grid),
        gcv_values=tuple(gcv_values),
        edf_values=tuple(edf_values),
    )
