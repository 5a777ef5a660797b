import numpy as np
import pytest
import scipy.stats

from surrhet.data import Dataset
from surrhet.errors import InsufficientDataError
from surrhet.estimator import FittedSurrogateModel, estimate_pte, fit_tlearner, zeta_diagnostic
from surrhet.learners import LearnerSpec
from surrhet.learners.linear import LinearModel
from surrhet.simulation import generate

LINEAR = LearnerSpec(family="linear")


def _setting1(seed, n, y_noise=1.0):
    return generate(1, np.random.default_rng(seed), n=n, y_noise_scale=y_noise)


def _manual_model(lambda0, lambda1, mu0, mu1, zeta0, p, y_sd=1.0):
    return FittedSurrogateModel(
        lambda0=lambda0, lambda1=lambda1, mu0=mu0, mu1=mu1, zeta0=zeta0,
        spec=LINEAR, frozen={}, y_sd=y_sd, n_covariates=p,
    )


def test_fit_tlearner_lambda1_matches_dgp_slope():
    # within the treated arm E[Y|X] has slope 2*0.2 + 0.2 + 2 = 2.6 on x1
    train = _setting1(7, 20000)
    model = fit_tlearner(train, LINEAR)
    mask = train.g == 1
    design = np.column_stack([np.ones(int(mask.sum())), train.x[mask]])
    oracle, *_ = np.linalg.lstsq(design, train.y[mask], rcond=None)
    assert np.max(np.abs(model.lambda1.coef - oracle)) < 1e-8
    assert abs(model.lambda1.coef[1] - 2.6) < 0.15


def test_fit_tlearner_errors_name_missing_group():
    d = Dataset(
        y=np.arange(30.0), s=np.zeros(30), g=np.ones(30, dtype=int),
        x=np.arange(30.0).reshape(-1, 1), column_names=("a",),
    )
    with pytest.raises(InsufficientDataError, match="lambda0"):
        fit_tlearner(d, LINEAR)


def test_fit_tlearner_frozen_record_deterministic():
    train = _setting1(3, 400)
    spec = LearnerSpec(family="forest")
    a = fit_tlearner(train, spec, np.random.default_rng(42))
    b = fit_tlearner(train, spec, np.random.default_rng(42))
    assert a.frozen == b.frozen
    assert set(a.frozen) == {"lambda0", "lambda1", "mu0", "mu1", "zeta0"}
    assert all("forest_seed" in rec for rec in a.frozen.values())


def test_estimate_pte_noiseless_linear_matches_analytic():
    # outcome noise off; surrogate noise stays (the surrogate must vary
    # given X for the residual-effect regressions to be identified)
    train = _setting1(11, 50000, y_noise=0.0)
    model = fit_tlearner(train, LINEAR)
    means = train.x.mean(axis=0)
    point = means.copy()
    point[0] = 1.0
    est = estimate_pte(model, point.reshape(1, -1))
    assert est.valid[0]
    assert abs(est.r_s[0] - 0.5) < 0.02
    assert abs(est.delta[0] - 6.0) < 0.1
    assert abs(est.delta_s[0] - 3.0) < 1e-6  # exact: zeta0 errors cancel


def test_identical_mu_models_give_rs_one():
    shared = LinearModel(coef=np.array([1.0, 2.0, 0.5]), n_features=2)
    lam0 = LinearModel(coef=np.array([0.0, 1.0]), n_features=1)
    lam1 = LinearModel(coef=np.array([3.0, 1.0]), n_features=1)
    zeta = LinearModel(coef=np.array([0.5, 0.2]), n_features=1)
    model = _manual_model(lam0, lam1, shared, shared, zeta, p=1)
    est = estimate_pte(model, np.array([[1.0], [2.0]]))
    assert np.all(est.delta_s == 0.0)
    assert np.all(est.r_s == 1.0)


def test_delta_floor_flags_rows():
    train = _setting1(13, 2000)
    model = fit_tlearner(train, LINEAR)
    est = estimate_pte(model, train.x[:50], delta_floor=10.0)
    assert not est.valid.any()
    assert np.all(np.isnan(est.r_s))
    assert np.isfinite(est.delta).all()


def test_plugin_identity_holds_to_1e12():
    train = _setting1(17, 3000)
    model = fit_tlearner(train, LINEAR)
    est = estimate_pte(model, train.x[:200])
    resid = (1.0 - est.r_s[est.valid]) * est.delta[est.valid] - est.delta_s[est.valid]
    assert np.max(np.abs(resid)) < 1e-12


def test_outcome_rescaling_leaves_rs_unchanged():
    train = _setting1(19, 3000)
    scaled = Dataset(
        y=train.y * 3.7, s=train.s, g=train.g, x=train.x, column_names=train.column_names
    )
    m1 = fit_tlearner(train, LINEAR)
    m2 = fit_tlearner(scaled, LINEAR)
    pts = train.x[:100]
    e1 = estimate_pte(m1, pts)
    e2 = estimate_pte(m2, pts)
    assert np.max(np.abs(e2.delta - 3.7 * e1.delta)) < 1e-8
    assert np.max(np.abs(e2.delta_s - 3.7 * e1.delta_s)) < 1e-8
    assert np.max(np.abs(e2.r_s - e1.r_s)) < 1e-10


def test_estimate_pte_is_pure():
    train = _setting1(23, 1500)
    model = fit_tlearner(train, LINEAR)
    a = estimate_pte(model, train.x[:80])
    b = estimate_pte(model, train.x[:80])
    for field in ("delta", "delta_s", "r_s", "zeta0_hat"):
        assert np.array_equal(getattr(a, field), getattr(b, field), equal_nan=True)


def test_estimate_pte_dimension_check():
    train = _setting1(29, 1000)
    model = fit_tlearner(train, LINEAR)
    with pytest.raises(ValueError):
        estimate_pte(model, np.ones((5, 3)))


def _control_only(n, seed, s_as_x1=False):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    s = x[:, 0] if s_as_x1 else x @ [0.5, 0.2] + rng.standard_normal(n)
    return Dataset(y=np.zeros(n), s=s, g=np.zeros(n, dtype=int), x=x, column_names=("x1", "x2"))


def test_zeta_diagnostic_exact_predictions_give_zero_ks():
    control = _control_only(500, 31, s_as_x1=True)
    zeta = LinearModel(coef=np.array([0.0, 1.0, 0.0]), n_features=2)  # predicts exactly x1
    model = _manual_model(zeta, zeta, zeta, zeta, zeta, p=2)
    diag = zeta_diagnostic(model, control)
    assert diag.ks_statistic == 0.0
    assert diag.n == 500


def test_zeta_diagnostic_shift_detected():
    control = _control_only(800, 37, s_as_x1=True)
    shifted = LinearModel(coef=np.array([1.0, 1.0, 0.0]), n_features=2)  # x1 + 1
    model = _manual_model(shifted, shifted, shifted, shifted, shifted, p=2)
    diag = zeta_diagnostic(model, control)
    assert diag.ks_statistic > 0.3


def test_zeta_diagnostic_matches_scipy_oracle():
    control = _control_only(300, 41)
    zeta = LinearModel(coef=np.array([0.1, 0.4, 0.1]), n_features=2)
    model = _manual_model(zeta, zeta, zeta, zeta, zeta, p=2)
    diag = zeta_diagnostic(model, control)
    expected = scipy.stats.ks_2samp(control.s, zeta.predict(control.x), method="asymp").statistic
    assert abs(diag.ks_statistic - expected) < 1e-12
    assert 0.0 <= diag.ks_statistic <= 1.0


def test_zeta_diagnostic_decile_table_and_errors():
    control = _control_only(400, 43)
    zeta = LinearModel(coef=np.array([0.0, 0.5, 0.2]), n_features=2)
    model = _manual_model(zeta, zeta, zeta, zeta, zeta, p=2)
    diag = zeta_diagnostic(model, control)
    assert sum(r["n"] for r in diag.decile_table) == 400
    treated = Dataset(
        y=[0.0], s=[0.0], g=[1], x=[[0.0, 0.0]], column_names=("x1", "x2")
    )
    with pytest.raises(ValueError):
        zeta_diagnostic(model, treated)


def test_misspecified_constant_zeta_has_larger_ks():
    control = _control_only(600, 47, s_as_x1=True)
    good = LinearModel(coef=np.array([0.0, 1.0, 0.0]), n_features=2)
    constant = LinearModel(coef=np.array([float(control.s.mean()), 0.0, 0.0]), n_features=2)
    good_ks = zeta_diagnostic(_manual_model(good, good, good, good, good, p=2), control).ks_statistic
    bad_ks = zeta_diagnostic(
        _manual_model(constant, constant, constant, constant, constant, p=2), control
    ).ks_statistic
    assert bad_ks > good_ks + 0.2
