"""Synthetic benchmark settings, analytic ground truth, and the study driver.

Four built-in data-generating settings share six covariates and a
confounded (covariate-dependent) treatment assignment:

* covariates: X1 ~ U(0,3), X2 ~ Gamma(2, scale 2), X3 ~ U(0,5),
  X4 ~ Gamma(3, 1), X5 ~ U(0,2), X6 ~ Gamma(1, 1);
* treatment: G ~ Bernoulli(0.5 * logistic(0.2 X1 + 0.3 X2 + 0.5 X3 +
  0.2 X4 + 0.4 X5 + 0.1 X6));
* surrogate: S = a*G + 0.2 X1 + 0.2 X2 + 0.3 X3 + 0.1 X4 + 0.4 X5 +
  0.3 X6 + noise, with a = 1.5 in setting 1 and a = 1 otherwise, and
  noise N(0, 0.4 + 1.4 G) read as a variance (see ``noise_convention``);
* outcome: Y = G + 2 S + f_k(X) + interaction_k(G, X1) + N(0, 1), where
  setting 1 is linear with interaction 2*G*X1, settings 2-3 are
  nonlinear with interaction 1.5*G*X1^2, and setting 4 repeats setting
  1's f without any interaction (constant explained fraction 2/3).

The analytic truth follows from the outcome being linear in S with
coefficient 2 and the interaction being the only heterogeneous direct
effect; ``mc_true_pte`` cross-checks it by simulating potential outcomes
with the surrogate pinned to its control draw.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from surrhet.data import Dataset, split
from surrhet.errors import SurrhetError
from surrhet.estimator import estimate_pte, fit_tlearner
from surrhet.inference import bootstrap_sd, bootstrap_pte, confusion_metrics, identify, percentile_ci
from surrhet.learners import FAMILIES, ForestParams, LearnerSpec

__all__ = [
    "SettingSpec",
    "StudyReport",
    "TruePte",
    "generate",
    "mc_true_pte",
    "run_study",
    "summarize_metrics",
    "true_pte",
]

SETTING_IDS = (1, 2, 3, 4)

_PROPENSITY_COEF = np.array([0.2, 0.3, 0.5, 0.2, 0.4, 0.1])
_SURROGATE_COEF = np.array([0.2, 0.2, 0.3, 0.1, 0.4, 0.3])
_LINEAR_OUTCOME_COEF = np.array([0.2, 0.5, 0.2, 0.1, 0.3, 0.4])
_COLUMN_NAMES = ("x1", "x2", "x3", "x4", "x5", "x6")


@dataclass(frozen=True)
class SettingSpec:
    """One benchmark configuration (defaults match the headline study)."""

    id: int
    n: int = 2000
    test_size: int = 200
    iterations: int = 1000
    B: int = 200
    kappa: float = 0.5
    alpha: float = 0.05
    seed: int = 0
    noise_convention: str = "variance"

    def __post_init__(self):
        if self.id not in SETTING_IDS:
            raise ValueError(f"setting id must be one of {SETTING_IDS}, got {self.id}")
        if self.noise_convention not in ("variance", "sd"):
            raise ValueError("noise_convention must be 'variance' or 'sd'")


@dataclass(frozen=True)
class TruePte:
    """Analytic per-row ground truth."""

    delta_true: np.ndarray
    delta_s_true: np.ndarray
    r_s_true: np.ndarray


def _draw_covariates(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.column_stack(
        [
            rng.uniform(0.0, 3.0, n),
            rng.gamma(2.0, 2.0, n),
            rng.uniform(0.0, 5.0, n),
            rng.gamma(3.0, 1.0, n),
            rng.uniform(0.0, 2.0, n),
            rng.gamma(1.0, 1.0, n),
        ]
    )


def _surrogate_treatment_coef(setting_id: int) -> float:
    return 1.5 if setting_id == 1 else 1.0


def _surrogate_noise_sd(g, convention: str):
    spread = 0.4 + 1.4 * np.asarray(g, dtype=np.float64)
    return np.sqrt(spread) if convention == "variance" else spread


def _outcome_base(setting_id: int, x: np.ndarray) -> np.ndarray:
    """The covariate-only part of the outcome mean (no G, no S)."""
    if setting_id in (1, 4):
        return x @ _LINEAR_OUTCOME_COEF
    if setting_id == 2:
        return (
            np.sin(x[:, 0])
            + np.cos(x[:, 1])
            + x[:, 2] ** 2
            + x[:, 3]
            + np.log(x[:, 4] + 1.0)
            + np.sqrt(x[:, 5])
        )
    return 0.5 * x[:, 0] * x[:, 4] ** 2 + np.log(x[:, 1] / x[:, 2]) + 2.0 * np.sin(x[:, 3] + x[:, 5])


def _interaction(setting_id: int, x1: np.ndarray) -> np.ndarray:
    """Treated-arm direct-effect modifier: the only source of heterogeneity."""
    if setting_id == 1:
        return 2.0 * x1
    if setting_id == 4:
        return np.zeros_like(x1)
    return 1.5 * x1**2


def generate(
    setting,
    rng: np.random.Generator,
    n: int | None = None,
    s_noise_scale: float = 1.0,
    y_noise_scale: float = 1.0,
) -> Dataset:
    """Draw one dataset from a benchmark setting.

    ``setting`` is a :class:`SettingSpec` or a bare setting id. The noise
    scales exist for diagnostics (a scale of zero removes that error
    term); note that a zero surrogate noise makes S a deterministic
    function of (G, X), which degenerates the surrogate-given-covariates
    regressions.
    """
    if isinstance(setting, SettingSpec):
        setting_id = setting.id
        n = setting.n if n is None else n
        convention = setting.noise_convention
    else:
        setting_id = int(setting)
        if setting_id not in SETTING_IDS:
            raise ValueError(f"setting id must be one of {SETTING_IDS}, got {setting_id}")
        if n is None:
            raise ValueError("n is required when passing a bare setting id")
        convention = "variance"
    if n < 2:
        raise ValueError("n must be at least 2")

    x = _draw_covariates(rng, n)
    p_g = 1.0 / (1.0 + np.exp(-(x @ _PROPENSITY_COEF)))
    g = (rng.random(n) < 0.5 * p_g).astype(np.int64)
    a = _surrogate_treatment_coef(setting_id)
    s = (
        a * g
        + x @ _SURROGATE_COEF
        + s_noise_scale * _surrogate_noise_sd(g, convention) * rng.standard_normal(n)
    )
    y = (
        g
        + 2.0 * s
        + _outcome_base(setting_id, x)
        + g * _interaction(setting_id, x[:, 0])
        + y_noise_scale * rng.standard_normal(n)
    )
    return Dataset(y=y, s=s, g=g, x=x, column_names=_COLUMN_NAMES)


def true_pte(setting_id: int, test_x) -> TruePte:
    """Closed-form ground truth at each covariate row.

    Validated against :func:`mc_true_pte` (potential-outcomes Monte
    Carlo) in the acceptance suite before use.
    """
    if setting_id not in SETTING_IDS:
        raise ValueError(f"setting id must be one of {SETTING_IDS}, got {setting_id}")
    X = np.asarray(test_x, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("test_x must be a 2-D matrix")
    x1 = X[:, 0]
    a = _surrogate_treatment_coef(setting_id)
    # delta = 1 (direct) + 2a (via S) + interaction; pinning S removes 2a
    delta = 1.0 + 2.0 * a + _interaction(setting_id, x1)
    delta_s = 1.0 + _interaction(setting_id, x1)
    return TruePte(delta_true=delta, delta_s_true=delta_s, r_s_true=1.0 - delta_s / delta)


def mc_true_pte(
    setting_id: int,
    x_row,
    rng: np.random.Generator,
    draws: int = 1_000_000,
    noise_convention: str = "variance",
) -> dict:
    """Potential-outcomes Monte Carlo oracle at a single covariate row.

    Simulates (S0, S1, Y0, Y1) jointly; the residual effect pins the
    surrogate under both arms to the control draw S0. Used to validate
    the closed forms in :func:`true_pte`.
    """
    x = np.asarray(x_row, dtype=np.float64).reshape(1, -1)
    base = float(_outcome_base(setting_id, x)[0])
    inter = float(_interaction(setting_id, x[:, 0])[0])
    s_mean = float((x @ _SURROGATE_COEF)[0])
    a = _surrogate_treatment_coef(setting_id)
    sd0 = float(_surrogate_noise_sd(0, noise_convention))
    sd1 = float(_surrogate_noise_sd(1, noise_convention))

    s0 = s_mean + sd0 * rng.standard_normal(draws)
    s1 = a + s_mean + sd1 * rng.standard_normal(draws)
    y0 = 2.0 * s0 + base + rng.standard_normal(draws)
    y1 = 1.0 + 2.0 * s1 + base + inter + rng.standard_normal(draws)
    delta = float(np.mean(y1 - y0))

    y0_pin = 2.0 * s0 + base + rng.standard_normal(draws)
    y1_pin = 1.0 + 2.0 * s0 + base + inter + rng.standard_normal(draws)
    delta_s = float(np.mean(y1_pin - y0_pin))
    return {"delta": delta, "delta_s": delta_s, "r_s": 1.0 - delta_s / delta}


@dataclass(frozen=True)
class FamilyResult:
    """Aggregated study metrics for one learner family."""

    estimation: dict
    identification: dict
    deciles: tuple
    iterations_attempted: int
    iterations_completed: int
    aborted: tuple = ()
    records: tuple = ()  # per-iteration raw arrays, kept only on request


@dataclass(frozen=True)
class StudyReport:
    """Per-setting study output across the requested learner families."""

    setting: SettingSpec
    families: dict
    runtime_seconds: float
    warnings: tuple = ()

    def to_json_dict(self) -> dict:
        """Deterministic report payload (wall-clock time excluded)."""
        return {
            "setting": {
                "id": self.setting.id,
                "n": self.setting.n,
                "test_size": self.setting.test_size,
                "iterations": self.setting.iterations,
                "B": self.setting.B,
                "kappa": self.setting.kappa,
                "alpha": self.setting.alpha,
                "seed": self.setting.seed,
                "noise_convention": self.setting.noise_convention,
            },
            "families": {
                name: {
                    "estimation": fr.estimation,
                    "identification": fr.identification,
                    "deciles": list(fr.deciles),
                    "iterations_attempted": fr.iterations_attempted,
                    "iterations_completed": fr.iterations_completed,
                    "aborted": list(fr.aborted),
                }
                for name, fr in sorted(self.families.items())
            },
            "warnings": list(self.warnings),
        }


def _mad(values: np.ndarray) -> float:
    # scaled to estimate an SD under normality, like the usual mad()
    return float(1.4826 * np.median(np.abs(values - np.median(values))))


def summarize_metrics(records: list[dict], kappa: float, n_bins: int = 10) -> tuple[dict, dict, tuple]:
    """Fold per-iteration records into study metrics.

    Bias/MSE/ASE/coverage are medians (or means, for coverage) over the
    pooled iteration-by-test-point values. The spread of estimates (ESE)
    needs aligned points across iterations, which fresh test draws do not
    give; estimates are pooled within deciles of X1 (the only driver of
    heterogeneity) and the scaled median-absolute-deviation per bin is
    medianed across bins.
    """
    if not records:
        raise ValueError("no completed iterations to summarize")
    x1 = np.concatenate([r["x1"] for r in records])
    rs_hat = np.concatenate([r["rs_hat"] for r in records])
    rs_true = np.concatenate([r["rs_true"] for r in records])
    valid = np.concatenate([r["valid"] for r in records])
    ci_lo = np.concatenate([r["ci_lo"] for r in records])
    ci_hi = np.concatenate([r["ci_hi"] for r in records])
    sd = np.concatenate([r["boot_sd"] for r in records])
    strong = np.concatenate([r["strong"] for r in records])

    err = rs_hat[valid] - rs_true[valid]
    ci_defined = np.isfinite(ci_lo) & np.isfinite(ci_hi)
    covered = (ci_lo[ci_defined] <= rs_true[ci_defined]) & (rs_true[ci_defined] <= ci_hi[ci_defined])

    edges = np.quantile(x1[valid], np.linspace(0.0, 1.0, n_bins + 1))
    bin_mads = []
    deciles = []
    for b in range(n_bins):
        lo, hi = edges[b], edges[b + 1]
        if b < n_bins - 1:
            mask = valid & (x1 >= lo) & (x1 < hi)
        else:
            mask = valid & (x1 >= lo) & (x1 <= hi)
        if not mask.any():
            continue
        bin_mads.append(_mad(rs_hat[mask]))
        bin_ci = mask & ci_defined
        deciles.append(
            {
                "decile": b + 1,
                "x1_range": [float(lo), float(hi)],
                "n": int(mask.sum()),
                "rs_true_mean": float(rs_true[mask].mean()),
                "rs_hat_mean": float(rs_hat[mask].mean()),
                "bias_median": float(np.median(np.abs(rs_hat[mask] - rs_true[mask]))),
                "coverage": float(
                    np.mean((ci_lo[bin_ci] <= rs_true[bin_ci]) & (rs_true[bin_ci] <= ci_hi[bin_ci]))
                )
                if bin_ci.any()
                else None,
            }
        )

    estimation = {
        "bias": float(np.median(np.abs(err))),
        "ese": float(np.median(bin_mads)) if bin_mads else None,
        "ase": float(np.median(sd[np.isfinite(sd)])) if np.isfinite(sd).any() else None,
        "mse": float(np.median(err**2)),
        "coverage": float(np.mean(covered)) if ci_defined.any() else None,
        "rs_hat_mean": float(rs_hat[valid].mean()) if valid.any() else None,
        "rs_true_mean": float(rs_true.mean()),
        "points_pooled": int(valid.size),
        "points_valid": int(valid.sum()),
        "points_ci_defined": int(ci_defined.sum()),
    }

    truth_strong = rs_true > kappa
    cm = confusion_metrics(strong, truth_strong)
    identification = {
        "ppv": cm.ppv,
        "npv": cm.npv,
        "specificity": cm.specificity,
        "sensitivity": cm.sensitivity,
        "tp": cm.tp,
        "fp": cm.fp,
        "tn": cm.tn,
        "fn": cm.fn,
        "kappa": kappa,
    }
    return estimation, identification, tuple(deciles)


def _learner_spec(family: str, forest_params: ForestParams | None) -> LearnerSpec:
    if family == "forest" and forest_params is not None:
        return LearnerSpec(family=family, forest_params=forest_params)
    return LearnerSpec(family=family)


def _run_iteration(args) -> dict:
    """One study iteration: generate, split, fit, bootstrap, identify."""
    setting, families, iteration, it_ss, forest_params, workers = args
    children = it_ss.spawn(1 + len(FAMILIES))
    gen_rng = np.random.default_rng(children[0])
    data = generate(setting, gen_rng)
    parts = split(data, setting.test_size, gen_rng)
    test_x = parts.test.x
    truths = true_pte(setting.id, test_x)

    out: dict = {"records": {}, "errors": {}}
    for family in families:
        fam_ss = children[1 + FAMILIES.index(family)]
        fit_ss, boot_ss = fam_ss.spawn(2)
        spec = _learner_spec(family, forest_params)
        try:
            model = fit_tlearner(parts.train, spec, np.random.default_rng(fit_ss))
            est = estimate_pte(model, test_x)
            dist = bootstrap_pte(
                parts.train,
                test_x,
                spec,
                model.frozen,
                setting.B,
                np.random.default_rng(boot_ss),
                delta_floor=est.delta_floor,
                workers=workers,
            )
            cis = percentile_ci(dist, setting.alpha)
            ident = identify(dist, setting.kappa, setting.alpha)
        except SurrhetError as exc:
            out["errors"][family] = str(exc)
            continue
        out["records"][family] = {
            "iteration": iteration,
            "x1": test_x[:, 0],
            "rs_hat": est.r_s,
            "rs_true": truths.r_s_true,
            "valid": est.valid,
            "ci_lo": cis["r_s"].lower,
            "ci_hi": cis["r_s"].upper,
            "boot_sd": bootstrap_sd(dist),
            "p_raw": ident.p_raw,
            "p_adjusted": ident.p_adjusted,
            "strong": ident.strong,
            "redraws": dist.redraws,
        }
    return out


def run_study(
    setting: SettingSpec,
    families=("linear",),
    workers: int = 1,
    forest_params: ForestParams | None = None,
    keep_records: bool = False,
) -> StudyReport:
    """Monte Carlo study of the full pipeline against analytic truth.

    Iterations are independent jobs with counter-derived seeds and the
    report is a pure fold over them in index order, so any worker count
    produces identical results. Component failures abort that iteration
    for that family and are recorded, never imputed.
    """
    if setting.iterations < 1:
        raise ValueError("iterations must be at least 1")
    families = tuple(families)
    for family in families:
        if family not in FAMILIES:
            raise ValueError(f"unknown learner family {family!r}")

    started = time.perf_counter()
    root = np.random.SeedSequence(setting.seed)
    iteration_seeds = root.spawn(setting.iterations)
    jobs = [
        (setting, families, i, iteration_seeds[i], forest_params, 1)
        for i in range(setting.iterations)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_iteration, jobs, chunksize=1))
    else:
        results = [_run_iteration(job) for job in jobs]

    warnings = []
    families_out = {}
    for family in families:
        records = [r["records"][family] for r in results if family in r["records"]]
        aborted = tuple(
            f"iteration {i}: {r['errors'][family]}"
            for i, r in enumerate(results)
            if family in r["errors"]
        )
        redraws = sum(r["redraws"] for r in records)
        if redraws:
            warnings.append(f"{family}: {redraws} bootstrap resamples redrawn (empty group)")
        if records:
            estimation, identification, deciles = summarize_metrics(records, setting.kappa)
        else:
            estimation, identification, deciles = {}, {}, ()
        families_out[family] = FamilyResult(
            estimation=estimation,
            identification=identification,
            deciles=deciles,
            iterations_attempted=setting.iterations,
            iterations_completed=len(records),
            aborted=aborted,
            records=tuple(records) if keep_records else (),
        )
    return StudyReport(
        setting=setting,
        families=families_out,
        runtime_seconds=time.perf_counter() - started,
        warnings=tuple(warnings),
    )
