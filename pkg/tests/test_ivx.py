import numpy as np
import pytest

import threshpred as tp
from threshpred.errors import (
    InvalidConfig,
    MissingExogenousDraws,
    NearSingularInstrumentGram,
)
from threshpred.rng import derive_rng
from conftest import make_sample


def double_sum_filter(x, rho):
    """Brute-force evaluation of the filtered-difference instrument."""
    m = x.shape[0] - 1
    z = np.zeros_like(x)
    for t in range(1, m + 1):
        acc = np.zeros(x.shape[1])
        for j in range(t):
            acc += rho**j * (x[t - j] - x[t - j - 1])
        z[t] = acc
    return z


class TestConfig:
    def test_filter_coefficient_value(self):
        cfg = tp.IvxConfig(c_z=1.0, gamma_z=0.95)
        assert cfg.rho(250) == pytest.approx(1.0 - 250 ** (-0.95), abs=1e-15)
        assert abs(cfg.rho(250) - 0.9947282) < 1e-6

    def test_domain_validation(self):
        with pytest.raises(InvalidConfig):
            tp.IvxConfig(c_z=-1.0)
        with pytest.raises(InvalidConfig):
            tp.IvxConfig(gamma_z=1.0)


class TestInstrument:
    def test_constant_series_gives_zero_instrument(self):
        x = np.full((100, 1), 3.0)
        z = tp.build_instrument(x, tp.IvxConfig())
        assert np.all(z == 0.0)

    def test_recursion_equals_double_sum(self):
        rng = derive_rng(31)
        x = np.cumsum(rng.standard_normal((201, 2)), axis=0)
        cfg = tp.IvxConfig()
        z = tp.build_instrument(x, cfg, horizon=200)
        zd = double_sum_filter(x, cfg.rho(200))
        scale = np.maximum(np.abs(zd), 1e-12)
        assert np.max(np.abs(z - zd) / scale) < 1e-12

    def test_too_short_series(self):
        with pytest.raises(InvalidConfig):
            tp.build_instrument(np.array([1.0]), tp.IvxConfig())


class TestCorrectedInstrument:
    def make_path(self, c, phi, n=300, seed=32, form="expanded"):
        cov = tp.CovarianceSpec()
        panel = tp.draw_innovations(cov, n, seed)
        spec = tp.PersistenceSpec(c=[c], phi=[phi], form=form)
        return tp.gen_regressor_path(spec, panel, n)

    def test_reduction_to_plain_filter_no_dynamics(self):
        path = self.make_path(0.0, 0.0)
        cfg = tp.IvxConfig()
        comp = tp.build_corrected_instrument(path, cfg)
        assert np.all(comp.eta2 == 0.0) and np.all(comp.eta3 == 0.0)
        z16 = tp.build_instrument(path.x, cfg, horizon=path.n)
        assert np.allclose(comp.combined, z16, rtol=1e-12, atol=1e-14)
        assert np.allclose(comp.combined, comp.z)

    def test_components_equal_double_sums(self):
        n = 100
        path = self.make_path(1.0, 0.3, n=n)
        cfg = tp.IvxConfig()
        comp = tp.build_corrected_instrument(path, cfg)
        rho = cfg.rho(n)
        u_x = path.innovations.u_x[:n]
        w = path.innovations.u_phi[:n] @ path.spec.phi
        x_lag = path.x[:-1]
        for series, weight in ((comp.z, lambda j: u_x[j]),
                               (comp.eta1, lambda j: x_lag[j]),
                               (comp.eta2, lambda j: w[j] * x_lag[j]),
                               (comp.eta3, lambda j: w[j] ** 2 * x_lag[j])):
            for s in (1, 2, 37, n):
                acc = np.zeros(path.p)
                for j in range(1, s + 1):
                    acc += rho ** (s - j) * weight(j - 1)
                scale = max(abs(acc[0]), 1e-12)
                assert abs(series[s, 0] - acc[0]) / scale < 1e-12

    def test_expanded_path_combined_equals_plain_filter(self):
        # the components decompose the plain filter exactly when the path
        # follows the expanded-quadratic coefficient recursion
        path = self.make_path(2.0, 0.4, form="expanded")
        cfg = tp.IvxConfig()
        comp = tp.build_corrected_instrument(path, cfg)
        z16 = tp.build_instrument(path.x, cfg, horizon=path.n)
        scale = np.maximum(np.abs(z16), 1e-10)
        assert np.max(np.abs(comp.combined - z16) / scale) < 1e-12

    def test_homogeneity_in_the_path_scale(self):
        path = self.make_path(1.0, 0.3)
        cfg = tp.IvxConfig()
        comp = tp.build_corrected_instrument(path, cfg)
        doubled = tp.RegressorPath(x=2.0 * path.x, rho=path.rho, spec=path.spec,
                                   innovations=tp.InnovationPanel(
                                       n=path.innovations.n, p=path.p, d=path.spec.d,
                                       draws=np.ascontiguousarray(path.innovations.draws
                                                                  * np.array([1.0, 2.0, 1.0])),
                                       seed=path.innovations.seed))
        comp2 = tp.build_corrected_instrument(doubled, cfg)
        for name in ("z", "eta1", "eta2", "eta3", "combined"):
            assert np.allclose(getattr(comp2, name), 2.0 * getattr(comp, name),
                               rtol=1e-12, atol=1e-12)


class TestIvxFit:
    def test_noiseless_recovery(self):
        n = 120
        rng = derive_rng(33)
        x = np.cumsum(rng.standard_normal((n, 1)), axis=0)
        q = rng.standard_normal(n)
        ind = q <= 0.0
        y = np.where(ind, 1.0 + 2.0 * x[:, 0], -0.5 + 0.7 * x[:, 0])
        s = tp.Sample(y=y, x_lag=x, q_lag=q)
        fit = tp.ivx_fit(s, 0.0)
        assert np.allclose(fit.theta1, [1.0, 2.0], atol=1e-8)
        assert np.allclose(fit.theta2, [-0.5, 0.7], atol=1e-8)
        assert np.allclose(fit.beta_ivx, [2.0, 0.7], atol=1e-8)

    def test_degenerate_regressor_raises(self):
        n = 80
        rng = derive_rng(34)
        s = tp.Sample(y=rng.standard_normal(n), x_lag=np.full((n, 1), 2.0),
                      q_lag=rng.standard_normal(n))
        with pytest.raises(NearSingularInstrumentGram):
            tp.ivx_fit(s, 0.0)

    def test_corrected_requires_path(self):
        rng = derive_rng(35)
        s = tp.Sample(y=rng.standard_normal(60),
                      x_lag=np.cumsum(rng.standard_normal((60, 1)), axis=0),
                      q_lag=rng.standard_normal(60))
        with pytest.raises(MissingExogenousDraws):
            tp.ivx_fit(s, 0.0, corrected=True)

    def test_threshold_shift_invariance(self):
        s = make_sample(n=150, seed=36, delta0=1.0)
        fit = tp.ivx_fit(s, 0.2)
        shifted = tp.Sample(y=s.y, x_lag=s.x_lag, q_lag=s.q_lag + 5.0)
        fit2 = tp.ivx_fit(shifted, 5.2)
        assert np.allclose(fit.theta, fit2.theta, rtol=1e-12)
        assert np.allclose(fit.avar, fit2.avar, rtol=1e-12)

    def test_agrees_with_ols_under_exogeneity(self):
        # paired simulation on matched seeds: with exogenous errors and no
        # threshold effect the two slope estimators share a target
        B, n = 500, 500
        diffs = np.empty(B)
        ols_disp = np.empty(B)
        for r in range(B):
            s = make_sample(n=n, seed=37, rep=r)
            gamma = float(np.median(s.q_lag))
            fit_iv = tp.ivx_fit(s, gamma)
            theta_ols, _ = tp.ols_fit(s, gamma)
            diffs[r] = fit_iv.beta_ivx[0] - theta_ols[1]
            ols_disp[r] = theta_ols[1]
        # mean slope discrepancy within 3 Monte Carlo standard errors
        assert abs(np.mean(diffs)) < 3.0 * np.std(diffs, ddof=1) / np.sqrt(B)


class TestFilteredShockLimit:
    def test_zero_loading_gives_zeros(self):
        d = tp.draw_filtered_shock_limit(tp.IvxConfig(), [0.0], [[1.0]], 1000, seed=1)
        assert np.all(d == 0.0)

    def test_variance_and_mean(self):
        d = tp.draw_filtered_shock_limit(tp.IvxConfig(c_z=1.0), [1.0], [[1.0]],
                                         100_000, seed=2)
        var = d.var()
        se = np.sqrt(2.0 / d.size) * 0.5  # sampling SE of a variance estimate
        assert abs(var - 0.5) < 3.0 * se
        assert abs(d.mean()) < 3.0 * np.sqrt(0.5 / d.size)

    def test_instrumented_shock_partial_sum_variance_trend(self):
        # finite-sample variance of n^{-gz/2} sum_j w_j rho_z^{n-j}
        # approaches phi' Omega phi / (2 c_z)
        cfg = tp.IvxConfig(c_z=1.0, gamma_z=0.95)
        target = 0.5
        rng = derive_rng(38)
        gaps = []
        for n in (250, 1000, 4000):
            rho = cfg.rho(n)
            weights = rho ** np.arange(n - 1, -1, -1)
            exact_var = n ** (-cfg.gamma_z) * np.sum(weights**2)
            draws = rng.standard_normal((4000, n)) @ weights * n ** (-cfg.gamma_z / 2)
            assert abs(draws.var() - exact_var) < 0.05 * exact_var
            gaps.append(abs(exact_var - target))
        assert gaps[2] < gaps[1] < gaps[0]

    def test_draw_count_validation(self):
        with pytest.raises(InvalidConfig):
            tp.draw_filtered_shock_limit(tp.IvxConfig(), [1.0], [[1.0]], 0, seed=1)
