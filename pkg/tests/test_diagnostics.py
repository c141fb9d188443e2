"""Score formulas, moment-matrix quadrature and remainder bookkeeping."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from monoqr.diagnostics import (
    RemainderReport,
    RemainderRow,
    TrueModel,
    linear_gaussian,
    location_scale_gaussian,
    m_matrix,
    model_bank,
    psi,
    psi_tilde,
    remainder_study,
)
from monoqr.estimator import FitConfig, Sample, fit_grid
from monoqr.grids import make_grid
from monoqr.rng import substream


def _flat_model(level=1.0):
    # All model functions constant; only useful for moment integrals.
    return TrueModel(
        name="flat",
        quantile=lambda tau, x: np.zeros_like(np.asarray(x, dtype=float)),
        gamma=lambda tau, x, degree: np.zeros(degree + 1),
        density=lambda x: np.full_like(np.asarray(x, dtype=float), level),
        cond_density=lambda tau, x: 1.0,
        class_prob=lambda x: 1.0,
        support=(-10.0, 10.0),
    )


class TestTrueModels:
    def test_bank_members_pass_their_checks(self):
        bank = model_bank()
        assert set(bank) == {"linear_gaussian", "location_scale_gaussian"}
        for ctor in bank.values():
            model, sampler = ctor()
            sample = sampler(50, substream(0, 0))
            assert sample.n == 50

    def test_check_rejects_unnormalized_density(self):
        model, _ = linear_gaussian()
        broken = TrueModel(
            name="broken",
            quantile=model.quantile,
            gamma=model.gamma,
            density=lambda x: 2.0 * np.ones_like(np.asarray(x, dtype=float)),
            cond_density=model.cond_density,
            class_prob=model.class_prob,
            support=model.support,
        )
        with pytest.raises(ValueError, match="integrates"):
            broken.check()

    def test_linear_gaussian_quantile_field(self):
        model, _ = linear_gaussian()
        z25 = stats.norm.ppf(0.25)
        assert float(model.quantile(0.25, 0.3)) == pytest.approx(0.3 + 0.5 * z25)
        np.testing.assert_allclose(model.gamma(0.25, 0.3, 1), [0.3 + 0.5 * z25, 1.0])

    def test_location_scale_gaussian_quantile_field(self):
        model, _ = location_scale_gaussian()
        z75 = stats.norm.ppf(0.75)
        x = 0.4
        assert float(model.quantile(0.75, x)) == pytest.approx(x + (0.5 + 0.25 * x) * z75)
        np.testing.assert_allclose(
            model.gamma(0.75, x, 1), [x + (0.5 + 0.25 * x) * z75, 1.0 + 0.25 * z75]
        )


class TestScores:
    def test_empty_window_gives_zero_vector(self):
        model, _ = linear_gaussian()
        sample = Sample.from_xy(np.array([0.0, 1.0]), np.array([5.0, 6.0]))
        cfg = FitConfig(degree=1, bandwidth=0.5)
        np.testing.assert_array_equal(psi(sample, 0.5, 0.5, cfg, model), [0.0, 0.0])
        np.testing.assert_array_equal(psi_tilde(sample, 0.5, 0.5, cfg, model), [0.0, 0.0])

    def test_single_observation_closed_form(self):
        model, _ = linear_gaussian()
        tau, x0, h = 0.25, 0.5, 0.8
        q = float(model.quantile(tau, x0))
        # One observation exactly at x0 with a negative quantile residual.
        sample = Sample.from_xy(np.array([q - 1.0]), np.array([x0]))
        cfg = FitConfig(degree=1, bandwidth=h)
        expected = -(1.0 / math.sqrt(h)) * (tau - 1.0) * np.array([1.0, 0.0])
        np.testing.assert_allclose(psi_tilde(sample, x0, tau, cfg, model), expected)

    def test_single_observation_positive_residual(self):
        model, _ = linear_gaussian()
        tau, x0, h = 0.25, 0.5, 0.8
        q = float(model.quantile(tau, x0))
        sample = Sample.from_xy(np.array([q + 1.0]), np.array([x0]))
        cfg = FitConfig(degree=1, bandwidth=h)
        expected = -(1.0 / math.sqrt(h)) * tau * np.array([1.0, 0.0])
        np.testing.assert_allclose(psi_tilde(sample, x0, tau, cfg, model), expected)

    def test_psi_equals_psi_tilde_for_exactly_linear_quantiles(self):
        model, sampler = linear_gaussian()
        sample = sampler(200, substream(4, 0))
        cfg = FitConfig(degree=1, bandwidth=0.4)
        for x0 in (0.3, 0.6):
            for tau in (0.25, 0.75):
                np.testing.assert_allclose(
                    psi(sample, x0, tau, cfg, model),
                    psi_tilde(sample, x0, tau, cfg, model),
                    atol=1e-12,
                )

    def test_off_window_observations_do_not_contribute(self):
        model, sampler = linear_gaussian()
        sample = sampler(100, substream(5, 0))
        cfg = FitConfig(degree=1, bandwidth=0.2)
        base = psi_tilde(sample, 0.5, 0.5, cfg, model)
        y2 = sample.outcomes.copy()
        far = np.abs(sample.covariates[:, 0] - 0.5) > 0.1
        y2[far, 0] += 50.0
        moved = Sample(outcomes=y2, covariates=sample.covariates, counts=sample.counts)
        np.testing.assert_array_equal(psi_tilde(moved, 0.5, 0.5, cfg, model), base)


class TestMMatrix:
    def test_unit_functions_give_uniform_moments(self):
        out = m_matrix(0.0, 0.5, FitConfig(degree=1, bandwidth=1.0), _flat_model())
        np.testing.assert_allclose(out, [[1.0, 0.0], [0.0, 1.0 / 12.0]], atol=1e-12)

    def test_zero_density_gives_zero_matrix(self):
        out = m_matrix(0.0, 0.5, FitConfig(degree=1, bandwidth=1.0), _flat_model(0.0))
        np.testing.assert_allclose(out, np.zeros((2, 2)), atol=1e-14)

    def test_linearity_in_density(self):
        single = m_matrix(0.0, 0.5, FitConfig(degree=1, bandwidth=1.0), _flat_model(1.0))
        double = m_matrix(0.0, 0.5, FitConfig(degree=1, bandwidth=1.0), _flat_model(2.0))
        np.testing.assert_allclose(double, 2.0 * single, rtol=1e-12)

    def test_support_edge_split(self):
        # At x = 0 half the window lies outside the covariate support, so
        # each moment reduces to an integral over [0, 1/2] only.
        model, _ = linear_gaussian()
        cfg = FitConfig(degree=1, bandwidth=1.0)
        out = m_matrix(0.0, 0.5, cfg, model)
        f_tau = 2.0 * stats.norm.pdf(0.0)
        for i in range(2):
            for j in range(2):
                ref, _ = integrate.quad(lambda t: f_tau * t ** (i + j), 0.0, 0.5)
                assert out[i, j] == pytest.approx(ref, abs=1e-10)

    def test_symmetric_positive_semidefinite_on_bank(self):
        cfg = FitConfig(degree=1, bandwidth=0.5)
        for ctor in model_bank().values():
            model, _ = ctor()
            for x0 in (0.25, 0.5, 0.75):
                out = m_matrix(x0, 0.5, cfg, model)
                np.testing.assert_allclose(out, out.T, atol=1e-12)
                assert np.all(np.linalg.eigvalsh(out) >= -1e-12)

    def test_rejects_multivariate_point(self):
        with pytest.raises(ValueError):
            m_matrix(np.array([0.1, 0.2]), 0.5, FitConfig(), _flat_model())


class TestRemainderStudy:
    def test_singleton_grid_sup_is_pointwise_remainder(self):
        model, sampler = linear_gaussian()
        grid = make_grid(0.5, 0.5, 1, taus=(0.5,))
        cfg = FitConfig(degree=1)
        report = remainder_study(
            model, sampler, n_values=(500,), cfg=cfg, grid=grid,
            replications=1, seed=3,
        )
        assert len(report.rows) == 1
        row = report.rows[0]

        n, h = 500, 500 ** (-0.2)
        cfg_n = FitConfig(degree=1, bandwidth=h)
        sample = sampler(n, substream(3, 0, 0))
        fits = fit_grid(sample, grid, cfg_n)
        gamma_true = np.asarray(model.gamma(0.5, 0.5, 1))
        lead = math.sqrt(n * h) * (fits.gamma[0, 0] - gamma_true) * np.array([1.0, h])
        minv = np.linalg.inv(m_matrix(0.5, 0.5, cfg_n, model))
        vec = lead + minv @ psi_tilde(sample, 0.5, 0.5, cfg_n, model)
        assert row.sup_remainder == pytest.approx(float(np.linalg.norm(vec)), rel=1e-12)
        assert row.envelope == pytest.approx(
            math.sqrt(math.log(n)) / (n ** 0.25 * h ** 0.25)
        )

    def test_both_variants_reported_and_finite(self):
        model, sampler = linear_gaussian()
        report = remainder_study(
            model, sampler, n_values=(400,), cfg=FitConfig(degree=1),
            grid=make_grid(0.3, 0.7, 3, taus=(0.5,)),
            replications=3, seed=1, variants=("theorem1", "theorem2"),
        )
        assert report.n_values("theorem1") == (400,)
        assert report.n_values("theorem2") == (400,)
        for row in report.rows:
            assert math.isfinite(row.sup_remainder)
        assert len(report.rows) == 6

    def test_bandwidth_rule_override(self):
        model, sampler = linear_gaussian()
        report = remainder_study(
            model, sampler, n_values=(300,), cfg=FitConfig(degree=1),
            grid=make_grid(0.4, 0.6, 2, taus=(0.5,)),
            replications=1, seed=2, bandwidth_rule=lambda n: 0.5,
        )
        assert report.rows[0].envelope == pytest.approx(
            math.sqrt(math.log(300)) / (300 ** 0.25 * 0.5 ** 0.25)
        )

    def test_unknown_variant_rejected(self):
        model, sampler = linear_gaussian()
        with pytest.raises(ValueError):
            remainder_study(
                model, sampler, n_values=(100,), cfg=FitConfig(),
                grid=make_grid(0.5, 0.5, 1, taus=(0.5,)),
                variants=("theorem3",),
            )


class TestRemainderReportType:
    def _rows(self):
        return (
            RemainderRow("theorem1", 100, 0, 2.0, 1.0),
            RemainderRow("theorem1", 100, 1, 4.0, 1.0),
            RemainderRow("theorem1", 400, 0, 1.0, 0.5),
            RemainderRow("theorem2", 100, 0, 7.0, 1.0),
        )

    def test_medians_and_normalization(self):
        report = RemainderReport(rows=self._rows())
        assert report.medians("theorem1") == {100: 3.0, 400: 1.0}
        assert report.normalized_medians("theorem1") == {100: 3.0, 400: 2.0}
        assert report.n_values("theorem2") == (100,)

    def test_csv_round_trip(self):
        text = RemainderReport(rows=self._rows()).to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "variant,n,replication,sup_remainder,envelope"
        assert len(lines) == 5
        fields = lines[1].split(",")
        assert fields[0] == "theorem1"
        assert float(fields[3]) == 2.0

    def test_row_validation(self):
        with pytest.raises(ValueError):
            RemainderRow("theorem1", 100, 0, -1.0, 1.0)
        with pytest.raises(ValueError):
            RemainderRow("theorem1", 100, 0, 1.0, 0.0)
