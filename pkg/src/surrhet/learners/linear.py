"""Ordinary least squares with an intercept via pivoted QR.

Rank-deficient columns get exactly zero coefficients (with a warning)
rather than an error, so downstream code can keep a fixed coefficient
layout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from surrhet.errors import InsufficientDataError
from surrhet.learners import MODEL_DUMP_FORMAT_VERSION


@dataclass(frozen=True)
class LinearModel:
    """OLS fit: ``coef[0]`` is the intercept, ``coef[1:]`` the feature slopes."""

    coef: np.ndarray
    n_features: int
    dropped: tuple[int, ...] = ()
    family: str = "linear"

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=np.float64).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected features with {self.n_features} columns, got shape {X.shape}"
            )
        return self.coef[0] + X @ self.coef[1:]

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_DUMP_FORMAT_VERSION,
            "family": "linear",
            "coef": [float(v) for v in self.coef],
            "n_features": self.n_features,
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LinearModel":
        return cls(
            coef=np.array(payload["coef"], dtype=np.float64),
            n_features=int(payload["n_features"]),
            dropped=tuple(payload.get("dropped", ())),
        )


def fit_linear(features, targets) -> LinearModel:
    """Least-squares fit of ``targets`` on an intercept plus ``features``.

    Uses QR with column pivoting; columns judged linearly dependent get a
    zero coefficient and a RuntimeWarning naming them. Requires n > q + 1.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n, q = X.shape
    if y.shape != (n,):
        raise ValueError(f"targets must have shape ({n},), got {y.shape}")
    if n <= q + 1:
        raise InsufficientDataError(
            f"need more than q+1={q + 1} rows to fit a linear model, got {n}",
            component="linear",
        )
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("features and targets must be finite")

    A = np.empty((n, q + 1), dtype=np.float64)
    A[:, 0] = 1.0
    A[:, 1:] = X
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(n, q + 1) * np.finfo(np.float64).eps if diag[0] > 0 else 0.0
    rank = int(np.count_nonzero(diag > tol))
    if rank == 0:
        raise InsufficientDataError("design matrix has rank zero", component="linear")

    coef = np.zeros(q + 1, dtype=np.float64)
    rhs = Q[:, :rank].T @ y
    coef_r = scipy.linalg.solve_triangular(R[:rank, :rank], rhs, lower=False)
    coef[piv[:rank]] = coef_r
    dropped = tuple(sorted(int(j) for j in piv[rank:]))
    if dropped:
        labels = ["intercept" if j == 0 else f"feature {j - 1}" for j in dropped]
        warnings.warn(
            f"rank-deficient design: zero coefficient assigned to {', '.join(labels)}",
            RuntimeWarning,
            stacklevel=2,
        )
    dropped_features = tuple(j - 1 for j in dropped if j > 0)
    return LinearModel(coef=coef, n_features=q, dropped=dropped_features)
