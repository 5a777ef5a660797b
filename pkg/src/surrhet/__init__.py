"""Heterogeneous surrogate-marker strength estimation for observational data.

Estimates, for each covariate profile x, the treatment effect delta(x), the
residual effect delta_s(x) after holding the surrogate at its control-arm
conditional mean, and the explained fraction r_s(x) = 1 - delta_s(x)/delta(x),
using separate regression fits per treatment arm (linear, additive spline,
or honest regression forest). Uncertainty comes from a nonparametric
bootstrap; per-individual surrogate-sufficiency calls use a threshold test
with false-discovery-rate correction.
"""

from surrhet.data import ColumnSchema, Dataset, SplitDataset, load_csv, split, validate
from surrhet.estimator import FittedSurrogateModel, PteEstimates, estimate_pte, fit_tlearner, zeta_diagnostic
from surrhet.inference import (
    BootstrapDistribution,
    IdentificationResult,
    bh_adjust,
    bootstrap_pte,
    confusion_metrics,
    identify,
    percentile_ci,
)
from surrhet.learners import ForestParams, GamParams, LearnerSpec
from surrhet.simulation import SettingSpec, StudyReport, generate, run_study, true_pte

__version__ = "0.1.0"

__all__ = [
    "BootstrapDistribution",
    "ColumnSchema",
    "Dataset",
    "FittedSurrogateModel",
    "ForestParams",
    "GamParams",
    "IdentificationResult",
    "LearnerSpec",
    "PteEstimates",
    "SettingSpec",
    "SplitDataset",
    "StudyReport",
    "bh_adjust",
    "bootstrap_pte",
    "confusion_metrics",
    "estimate_pte",
    "fit_tlearner",
    "generate",
    "identify",
    "load_csv",
    "percentile_ci",
    "run_study",
    "split",
    "true_pte",
    "validate",
    "zeta_diagnostic",
]
