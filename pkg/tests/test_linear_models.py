"""
线性模型测试
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.linear_models import (LinearModel, fit_ols, fit_ridge, fit_lasso, fit_elastic_net, kkt_violation,
                               lambda_max)
from src.exceptions import NumericalError, ConvergenceError, ShapeMismatchError, ModelParameterError


def regression_data(seed, n=60, p=4, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p)) * rng.uniform(0.5, 3.0, size=p) + rng.normal(size=p)
    beta = rng.normal(scale=2.0, size=p)
    y = X @ beta + 1.5 + rng.normal(scale=noise, size=n)
    return X, y


def ridge_by_gradient_descent(X, y, lam, iterations=50000):
    """对 ||y - Xb - c||² + λ||b||² 做固定步长梯度下降"""
    n, p = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    penalty = np.r_[np.full(p, lam), 0.0]
    step = 1.0 / (2.0 * (np.linalg.eigvalsh(A.T @ A).max() + lam))
    theta = np.zeros(p + 1)
    for _ in range(iterations):
        grad = -2.0 * A.T @ (y - A @ theta) + 2.0 * penalty * theta
        theta -= step * grad
    return theta[:p], theta[p]


class TestRidge:
    @pytest.mark.parametrize('lam', [0.1, 3.0, 50.0])
    def test_matches_gradient_descent(self, lam):
        X, y = regression_data(1, n=40, p=3)
        model = fit_ridge(X, y, lam)
        beta, intercept = ridge_by_gradient_descent(X, y, lam)
        np.testing.assert_allclose(model.coefficients, beta, atol=1e-6)
        assert model.intercept == pytest.approx(intercept, abs=1e-6)

    def test_exact_fit(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 5))
        y = X @ np.array([1.0, -2.0, 0.5, 3.0, 0.0]) + 7.0
        model = fit_ols(X, y)
        assert np.abs(model.predict(X) - y).max() < 1e-9
        assert model.penalty == 'none'

    def test_huge_penalty_shrinks_to_mean(self):
        X, y = regression_data(3)
        model = fit_ridge(X, y, 1e9)
        assert np.abs(model.coefficients).max() < 1e-4
        assert model.intercept == pytest.approx(y.mean(), abs=1e-3)

    def test_singular_system(self):
        X, y = regression_data(4, p=2)
        X = np.hstack([X, X[:, :1]])
        with pytest.raises(NumericalError) as info:
            fit_ridge(X, y, 0.0)
        assert info.value.details['condition_estimate'] >= 1e12
        model = fit_ols(X, y)
        assert model.info['pinv_fallback'] is True
        reference = fit_ols(X[:, :2], y)
        np.testing.assert_allclose(model.predict(X), reference.predict(X[:, :2]), atol=1e-8)

    def test_negative_lambda(self):
        X, y = regression_data(5)
        with pytest.raises(ModelParameterError):
            fit_ridge(X, y, -1.0)


class TestCoordinateDescent:
    def test_lambda_max_zeroes_everything(self):
        X, y = regression_data(6)
        top = lambda_max(X, y)
        np.testing.assert_allclose(fit_lasso(X, y, top).coefficients, 0.0, atol=1e-12)
        assert np.all(fit_lasso(X, y, top * 1.001).coefficients == 0.0)
        assert np.any(fit_lasso(X, y, 0.9 * top).coefficients != 0.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), frac=st.floats(0.01, 0.8), alpha=st.floats(0.1, 1.0))
    def test_kkt_conditions(self, seed, frac, alpha):
        X, y = regression_data(seed, n=50, p=5)
        model = fit_elastic_net(X, y, frac * lambda_max(X, y), alpha)
        assert kkt_violation(model, X, y) <= 1e-6

    def test_zero_lambda_equals_ols(self):
        X, y = regression_data(7, n=200, p=3)
        lasso = fit_lasso(X, y, 0.0)
        ols = fit_ols(X, y)
        np.testing.assert_allclose(lasso.coefficients, ols.coefficients, atol=1e-5)
        assert lasso.intercept == pytest.approx(ols.intercept, abs=1e-4)

    def test_pure_l2_matches_ridge_on_standardized_columns(self):
        X, y = regression_data(8, n=80, p=3)
        Z = (X - X.mean(axis=0)) / X.std(axis=0)
        net = fit_elastic_net(Z, y, lam=0.2, alpha=0.0)
        ridge = fit_ridge(Z, y, lam=0.2 * len(y))
        np.testing.assert_allclose(net.coefficients, ridge.coefficients, atol=1e-6)
        assert net.penalty == 'elastic_net'

    def test_constant_column_gets_zero(self):
        X, y = regression_data(9, p=3)
        X[:, 1] = 4.0
        model = fit_lasso(X, y, 0.01)
        assert model.coefficients[1] == 0.0
        assert kkt_violation(model, X, y) <= 1e-6

    def test_sweep_limit(self):
        X, y = regression_data(10)
        with pytest.raises(ConvergenceError) as info:
            fit_lasso(X, y, 0.001, max_sweeps=1)
        assert info.value.details['sweeps'] == 1

    @pytest.mark.parametrize('kwargs', [{'lam': -0.1}, {'alpha': 1.5}, {'alpha': -0.1}])
    def test_invalid_parameters(self, kwargs):
        X, y = regression_data(11)
        with pytest.raises(ModelParameterError):
            fit_elastic_net(X, y, **{'lam': 0.1, 'alpha': 0.5, **kwargs})


class TestLinearModel:
    def test_predict_shape_check(self):
        X, y = regression_data(12, p=3)
        model = fit_ols(X, y)
        with pytest.raises(ShapeMismatchError):
            model.predict(np.ones((2, 4)))

    def test_row_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            fit_ols(np.ones((5, 2)), np.ones(4))

    def test_dict_round_trip(self):
        X, y = regression_data(13)
        model = fit_elastic_net(X, y, 0.05, 0.5)
        back = LinearModel.from_dict(model.to_dict())
        np.testing.assert_array_equal(back.predict(X), model.predict(X))
        assert back.penalty == 'elastic_net' and back.alpha == 0.5
