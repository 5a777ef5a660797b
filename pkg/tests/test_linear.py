import numpy as np
import pytest

from surrhet.errors import InsufficientDataError
from surrhet.learners.linear import LinearModel, fit_linear


def test_noiseless_line_recovered():
    x = np.linspace(0, 5, 50).reshape(-1, 1)
    y = 2.0 + 3.0 * x[:, 0]
    model = fit_linear(x, y)
    assert abs(model.coef[0] - 2.0) < 1e-10
    assert abs(model.coef[1] - 3.0) < 1e-10


def test_constant_target_gives_intercept_only(rng):
    x = rng.standard_normal((40, 3))
    y = np.full(40, 5.0)
    model = fit_linear(x, y)
    assert abs(model.coef[0] - 5.0) < 1e-10
    assert np.all(np.abs(model.coef[1:]) < 1e-10)


def test_matches_normal_equations_oracle():
    rng = np.random.default_rng(424242)
    x = rng.standard_normal((200, 4))
    y = x @ np.array([1.0, -2.0, 0.5, 3.0]) + 0.7 + rng.standard_normal(200)
    model = fit_linear(x, y)
    design = np.column_stack([np.ones(200), x])
    oracle = np.linalg.solve(design.T @ design, design.T @ y)
    assert np.max(np.abs(model.coef - oracle)) < 1e-8


def test_residuals_orthogonal_to_features(rng):
    x = rng.standard_normal((150, 5))
    y = x @ rng.standard_normal(5) + rng.standard_normal(150)
    model = fit_linear(x, y)
    residuals = y - model.predict(x)
    design = np.column_stack([np.ones(150), x])
    assert np.max(np.abs(design.T @ residuals)) < 1e-8


def test_insufficient_rows():
    x = np.ones((4, 4))
    with pytest.raises(InsufficientDataError):
        fit_linear(x, np.ones(4))


def test_rank_deficiency_zeroes_a_column_with_warning(rng):
    x = rng.standard_normal((80, 2))
    x = np.column_stack([x, x[:, 0] + x[:, 1]])  # exact dependency
    y = 1.0 + x[:, 0] - x[:, 1]
    with pytest.warns(RuntimeWarning, match="rank-deficient"):
        model = fit_linear(x, y)
    assert np.count_nonzero(model.coef == 0.0) >= 1
    assert len(model.dropped) == 1
    # fitted function still reproduces the noiseless targets on the data
    assert np.max(np.abs(model.predict(x) - y)) < 1e-8


def test_predict_arithmetic_and_dim_check():
    model = LinearModel(coef=np.array([2.0, 3.0]), n_features=1)
    assert model.predict(np.array([[4.0]]))[0] == 14.0
    with pytest.raises(ValueError):
        model.predict(np.ones((3, 2)))


def test_fit_does_not_mutate_inputs(rng):
    x = rng.standard_normal((50, 2))
    y = rng.standard_normal(50)
    x0, y0 = x.copy(), y.copy()
    fit_linear(x, y)
    assert np.array_equal(x, x0)
    assert np.array_equal(y, y0)


def test_serialization_round_trip(rng):
    x = rng.standard_normal((60, 3))
    y = x @ np.array([1.0, 2.0, -1.0]) + rng.standard_normal(60)
    model = fit_linear(x, y)
    clone = LinearModel.from_dict(model.to_dict())
    xt = rng.standard_normal((10, 3))
    assert np.array_equal(model.predict(xt), clone.predict(xt))
