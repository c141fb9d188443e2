"""Local polynomial quantile regression fits: exactness, locality, scaling."""

import numpy as np
import pytest
from oracles import vertex_minimum

from monoqr.basis import basis_eval, kernel_eval, Kernel, multi_indices
from monoqr.errors import InsufficientSupportError
from monoqr.estimator import (
    FitConfig,
    LocalQuantileRegressor,
    Sample,
    derivative_estimate,
    fit_grid,
    fit_local,
)
from monoqr.grids import make_grid
from monoqr.solver import WeightedQrProblem, solve


def _uniform_sample(n, seed, noise=0.0, slope=0.0, intercept=0.0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, n)
    y = intercept + slope * x + noise * rng.normal(size=n)
    return Sample.from_xy(y, x), x, y


class TestFitLocal:
    def test_constant_data(self):
        sample, _, _ = _uniform_sample(40, 1, intercept=5.0)
        fit = fit_local(sample, 0.5, 0.5, FitConfig(degree=1, bandwidth=1.0))
        np.testing.assert_allclose(fit.gamma_hat, [5.0, 0.0], atol=1e-12)

    def test_exact_linear_data(self):
        sample, _, _ = _uniform_sample(40, 2, slope=2.0)
        fit = fit_local(sample, 0.5, 0.5, FitConfig(degree=1, bandwidth=4.0))
        np.testing.assert_allclose(fit.gamma_hat, [1.0, 2.0], atol=1e-10)
        assert derivative_estimate(fit) == pytest.approx(2.0, abs=1e-10)

    def test_matches_hand_assembled_problem(self):
        # Dual route: assemble the weighted problem directly from the
        # definitions and compare the unscaled solution.
        sample, x, y = _uniform_sample(50, 3, slope=1.0, noise=0.1)
        h, x0, tau = 0.9, 0.5, 0.5
        cfg = FitConfig(degree=1, bandwidth=h)
        fit = fit_local(sample, x0, tau, cfg)

        idx = multi_indices(1, 1)
        z = (x - x0) / h
        win = kernel_eval(Kernel.UNIFORM, z.reshape(-1, 1)) > 0.0
        design = basis_eval(idx, z[win].reshape(-1, 1))
        sol = solve(WeightedQrProblem(
            responses=y[win], design=design, weights=np.ones(win.sum()), tau=tau
        ))
        np.testing.assert_allclose(
            fit.gamma_hat, sol.coefficients / np.array([1.0, h]), atol=1e-12
        )
        assert fit.effective_n == int(win.sum())

    def test_subsampled_vertex_oracle(self):
        sample, x, y = _uniform_sample(8, 4, slope=1.0, noise=0.1)
        h, x0, tau = 4.0, 0.5, 0.25
        fit = fit_local(sample, x0, tau, FitConfig(degree=1, bandwidth=h))
        design = basis_eval(multi_indices(1, 1), ((x - x0) / h).reshape(-1, 1))
        oracle, _ = vertex_minimum(y, design, np.ones(8), tau)
        scaled = fit.gamma_hat * np.array([1.0, h])
        r = y - design @ scaled
        obj = float(np.sum(r * (tau - (r <= 0.0))))
        assert obj == pytest.approx(oracle, rel=1e-9, abs=1e-12)

    def test_scaling_invariance_of_derivative_units(self):
        # The same data fit with two bandwidths that both cover every point
        # must report identical derivative-unit coefficients for exact data.
        sample, _, _ = _uniform_sample(30, 5, slope=-1.5, intercept=0.3)
        f2 = fit_local(sample, 0.4, 0.5, FitConfig(degree=1, bandwidth=2.0))
        f8 = fit_local(sample, 0.4, 0.5, FitConfig(degree=1, bandwidth=8.0))
        np.testing.assert_allclose(f2.gamma_hat, f8.gamma_hat, atol=1e-10)
        np.testing.assert_allclose(f2.gamma_hat, [0.3 - 1.5 * 0.4, -1.5], atol=1e-10)

    def test_window_locality(self):
        sample, x, y = _uniform_sample(60, 6, slope=1.0, noise=0.05)
        cfg = FitConfig(degree=1, bandwidth=0.4)
        base = fit_local(sample, 0.3, 0.5, cfg)
        outside = np.abs(x - 0.3) > 0.2
        y2 = y.copy()
        y2[outside] += 100.0
        moved = fit_local(Sample.from_xy(y2, x), 0.3, 0.5, cfg)
        np.testing.assert_array_equal(moved.gamma_hat, base.gamma_hat)

    def test_location_equivariance(self):
        sample, x, y = _uniform_sample(50, 7, slope=0.5, noise=0.1)
        cfg = FitConfig(degree=1, bandwidth=0.8)
        base = fit_local(sample, 0.5, 0.5, cfg)
        shifted = fit_local(Sample.from_xy(y + 2.5, x), 0.5, 0.5, cfg)
        assert shifted.gamma_hat[0] == pytest.approx(base.gamma_hat[0] + 2.5, abs=1e-9)
        assert shifted.gamma_hat[1] == pytest.approx(base.gamma_hat[1], abs=1e-9)

    def test_insufficient_support(self):
        sample = Sample.from_xy(np.array([1.0, 2.0]), np.array([0.0, 1.0]))
        with pytest.raises(InsufficientSupportError):
            fit_local(sample, 0.5, 0.5, FitConfig(degree=1, bandwidth=0.1))

    def test_outcome_class_isolation(self):
        # Rows of other outcome classes must not influence a class-1 fit.
        rng = np.random.default_rng(8)
        x = rng.uniform(0.0, 1.0, 40)
        y = x + 0.1 * rng.normal(size=40)
        counts = np.ones(40, dtype=np.int64)
        counts[20:] = 2
        outcomes = np.column_stack([y, np.full(40, 99.0)])
        mixed = fit_local(
            Sample(outcomes=outcomes, covariates=x, counts=counts),
            0.5, 0.5, FitConfig(degree=1, bandwidth=1.0, outcome_class=1),
        )
        only_class1 = fit_local(
            Sample.from_xy(y[:20], x[:20]),
            0.5, 0.5, FitConfig(degree=1, bandwidth=1.0),
        )
        np.testing.assert_array_equal(mixed.gamma_hat, only_class1.gamma_hat)

    def test_multi_outcome_expansion(self):
        # A class-2 fit uses both outcomes of every L=2 observation; the
        # equivalent flat sample of single outcomes must give the same fit.
        rng = np.random.default_rng(9)
        x = rng.uniform(0.0, 1.0, 30)
        y1 = x + 0.1 * rng.normal(size=30)
        y2 = x + 0.1 * rng.normal(size=30)
        paired = Sample(
            outcomes=np.column_stack([y1, y2]),
            covariates=x,
            counts=np.full(30, 2, dtype=np.int64),
        )
        cfg2 = FitConfig(degree=1, bandwidth=1.0, outcome_class=2)
        fit_paired = fit_local(paired, 0.5, 0.5, cfg2)

        flat = Sample.from_xy(np.concatenate([y1, y2]), np.concatenate([x, x]))
        fit_flat = fit_local(flat, 0.5, 0.5, FitConfig(degree=1, bandwidth=1.0))
        assert fit_paired.gamma_hat[0] == pytest.approx(fit_flat.gamma_hat[0], abs=1e-9)
        assert fit_paired.gamma_hat[1] == pytest.approx(fit_flat.gamma_hat[1], abs=1e-9)


class TestFitGrid:
    def test_singleton_grid_matches_fit_local(self):
        sample, _, _ = _uniform_sample(50, 10, slope=1.0, noise=0.1)
        cfg = FitConfig(degree=1, bandwidth=1.0)
        grid = make_grid(0.5, 0.5, 1, taus=(0.5,))
        fits = fit_grid(sample, grid, cfg)
        single = fit_local(sample, 0.5, 0.5, cfg)
        np.testing.assert_allclose(fits.gamma[0, 0], single.gamma_hat, atol=1e-12)
        assert fits.effective_n[0, 0] == single.effective_n

    def test_default_grid_all_nodes_succeed(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(0.0, 1.0, 200)
        y = (x ** 4) * rng.normal(0.0, 0.1, 200)
        fits = fit_grid(Sample.from_xy(y, x), make_grid(), FitConfig(degree=1, bandwidth=1.0))
        assert fits.gamma.shape == (19, 1, 2)
        assert np.all(np.isfinite(fits.gamma))
        assert np.all(fits.effective_n >= 2)

    def test_bit_for_bit_determinism(self):
        sample, _, _ = _uniform_sample(80, 12, slope=0.3, noise=0.2)
        cfg = FitConfig(degree=1, bandwidth=0.9)
        grid = make_grid(0.1, 0.9, 9, taus=(0.25, 0.75))
        a = fit_grid(sample, grid, cfg)
        b = fit_grid(sample, grid, cfg)
        np.testing.assert_array_equal(a.gamma, b.gamma)

    def test_ghat_qhat_views(self):
        sample, _, _ = _uniform_sample(60, 13, slope=2.0)
        fits = fit_grid(
            sample, make_grid(0.2, 0.8, 4, taus=(0.5,)), FitConfig(degree=1, bandwidth=4.0)
        )
        np.testing.assert_allclose(fits.ghat[:, 0], np.full(4, 2.0), atol=1e-9)
        np.testing.assert_allclose(
            fits.qhat[:, 0], 2.0 * np.linspace(0.2, 0.8, 4), atol=1e-9
        )

    def test_node_failure_identifies_node(self):
        sample = Sample.from_xy(np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.15, 0.9]))
        grid = make_grid(0.1, 0.9, 2, taus=(0.5,))
        with pytest.raises(InsufficientSupportError, match="0.9"):
            fit_grid(sample, grid, FitConfig(degree=1, bandwidth=0.2))


class TestDerivativeEstimate:
    def test_rejects_multivariate(self):
        rng = np.random.default_rng(14)
        X = rng.uniform(0.0, 1.0, size=(30, 2))
        y = X[:, 0] + X[:, 1]
        sample = Sample(outcomes=y.reshape(-1, 1), covariates=X,
                        counts=np.ones(30, dtype=np.int64))
        fit = fit_local(sample, np.array([0.5, 0.5]), 0.5, FitConfig(degree=1, bandwidth=4.0))
        with pytest.raises(ValueError):
            derivative_estimate(fit)


class TestSklearnEstimator:
    def test_fit_predict_roundtrip(self):
        rng = np.random.default_rng(15)
        X = rng.uniform(0.0, 1.0, size=(100, 1))
        y = 1.0 + 2.0 * X[:, 0]
        est = LocalQuantileRegressor(tau=0.5, degree=1, bandwidth=4.0)
        assert est.fit(X, y) is est
        pred = est.predict(np.array([[0.25], [0.75]]))
        np.testing.assert_allclose(pred, [1.5, 2.5], atol=1e-9)
        np.testing.assert_allclose(
            est.predict_derivative(np.array([[0.5]])), [2.0], atol=1e-9
        )

    def test_get_set_params(self):
        est = LocalQuantileRegressor()
        params = est.get_params()
        assert params == {"tau": 0.5, "degree": 1, "bandwidth": 0.5}
        est.set_params(tau=0.75, bandwidth=1.0)
        assert est.tau == 0.75
        assert est.bandwidth == 1.0

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            LocalQuantileRegressor().predict(np.array([[0.5]]))
