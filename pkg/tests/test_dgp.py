import numpy as np
import pytest

import threshpred as tp
from threshpred.errors import (
    DimensionMismatch,
    InvalidSampleSize,
    OverflowDetected,
)
from threshpred.rng import derive_rng


@pytest.fixture
def panel():
    return tp.draw_innovations(tp.CovarianceSpec(), 600, seed=2)


class TestRegressorPath:
    def test_zero_parameters_reduce_to_random_walk_bit_exact(self, panel):
        spec = tp.PersistenceSpec(c=[0.0], phi=[0.0], form="exact")
        path = tp.gen_regressor_path(spec, panel, 500)
        assert np.all(path.rho == 1.0)
        walk = np.concatenate([[0.0], np.cumsum(panel.u_x[:500, 0])])
        assert np.array_equal(path.x[:, 0], walk)

    def test_deterministic_coefficient_without_shock(self, panel):
        spec = tp.PersistenceSpec(c=[1.0], phi=[0.0], form="exact")
        path = tp.gen_regressor_path(spec, panel, 250)
        assert np.all(path.rho == np.exp(1.0 / 250))
        assert abs(path.rho[0, 0] - 1.0040080) < 1e-7

    def test_expanded_form_close_to_exact_per_step(self, panel):
        n = 500
        exact = tp.realized_rho(tp.PersistenceSpec(c=[1.0], phi=[0.25], form="exact"),
                                panel.u_phi, n)
        expanded = tp.realized_rho(tp.PersistenceSpec(c=[1.0], phi=[0.25], form="expanded"),
                                   panel.u_phi, n)
        assert np.max(np.abs(exact - expanded)) < 10.0 * n ** (-1.5)

    def test_recursion_audit(self, panel):
        spec = tp.PersistenceSpec(c=[2.0], phi=[0.5], form="expanded")
        path = tp.gen_regressor_path(spec, panel, 500)
        assert path.recursion_error() <= 1e-12

    def test_partial_sum_variance_matches_ou_moment(self):
        # Var(x_n / sqrt(n)) -> (e^{2c} - 1) / (2c) for c > 0, no shock
        c, n, B = 1.0, 2000, 5000
        rng = derive_rng(99, "ou-variance-check")
        u = rng.standard_normal((B, n))
        rho = np.exp(c / n)
        x = np.zeros(B)
        for t in range(n):
            x = rho * x + u[:, t]
        var = np.var(x / np.sqrt(n))
        target = (np.exp(2 * c) - 1.0) / (2 * c)
        assert abs(var - target) / target < 0.05
        # the batched recursion above is the same recursion the path
        # generator runs; spot-check one path for agreement
        spec = tp.PersistenceSpec(c=[c], phi=[0.0])
        draws = np.zeros((n, 3))
        draws[:, 1] = u[0]
        panel0 = tp.InnovationPanel(n=n, p=1, d=1, draws=draws, seed=0)
        path = tp.gen_regressor_path(spec, panel0, n)
        ref = np.zeros(1)
        refs = [0.0]
        for t in range(n):
            refs.append(rho * refs[-1] + u[0, t])
        assert np.allclose(path.x[:, 0], refs, rtol=0, atol=0)

    def test_overflow_guard(self):
        spec = tp.PersistenceSpec(c=[50_000.0], phi=[0.0])
        panel = tp.draw_innovations(tp.CovarianceSpec(), 100, seed=1)
        with pytest.raises(OverflowDetected):
            tp.gen_regressor_path(spec, panel, 100)

    def test_dimension_mismatch(self, panel):
        spec = tp.PersistenceSpec(c=[1.0, 1.0], phi=[0.0])
        with pytest.raises(DimensionMismatch):
            tp.gen_regressor_path(spec, panel, 100)
        with pytest.raises(DimensionMismatch):
            tp.gen_regressor_path(tp.PersistenceSpec(c=[1.0], phi=[0.0]), panel, 1000)

    def test_initial_condition_flag(self, panel):
        spec = tp.PersistenceSpec(c=[1.0], phi=[0.0])
        path = tp.gen_regressor_path(spec, panel, 100, x0=np.array([3.0]))
        assert path.x[0, 0] == 3.0
        default = tp.gen_regressor_path(spec, panel, 100)
        assert default.x[0, 0] == 0.0
        # zero start implies the first value is the first innovation
        assert default.x[1, 0] == panel.u_x[0, 0]


class TestThresholdSample:
    def test_benchmark_regime_slope_value(self):
        dgp, pers, cov = tp.benchmark_dgp(c=1.0, phi=0.25, p=2)
        beta1, beta2 = dgp.regime_slopes(250)
        assert np.allclose(beta1, 2.0 / 250**0.25)
        assert abs(beta1[0] - 0.502973) < 1e-6
        assert np.all(beta2 == 0.0)

    def test_null_configuration_is_linear(self):
        dgp, pers, cov = tp.benchmark_dgp(c=1.0, phi=0.0, p=1, null=True)
        s = tp.gen_threshold_sample(dgp, pers, cov, 100, seed=4)
        # no threshold effect: y is the error series itself
        panel = tp.draw_innovations(cov, 100, 4)
        assert np.array_equal(s.y, panel.u_y)

    def test_noiseless_sample_reproduces_conditional_mean(self):
        n = 60
        draws = np.zeros((n, 3))
        draws[:, 1] = 1.0  # deterministic unit regressor innovations
        panel = tp.InnovationPanel(n=n, p=1, d=1, draws=draws, seed=0)
        spec = tp.PersistenceSpec(c=[0.0], phi=[0.0])
        path = tp.gen_regressor_path(spec, panel, n)
        dgp = tp.ThresholdDgpSpec(alpha=(0.0, 0.0), beta_base=np.array([1.0]), gamma0=0.0)
        rng = derive_rng(8)
        q = rng.standard_normal(n)
        s = tp.assemble_threshold_sample(dgp, path, q, np.zeros(n))
        assert np.array_equal(s.y, s.x_lag[:, 0])

    def test_regime_assignment_uses_lagged_threshold(self):
        dgp = tp.ThresholdDgpSpec(alpha=(5.0, -5.0), beta_base=np.zeros(1), gamma0=0.25)
        pers = tp.PersistenceSpec(c=[1.0], phi=[0.0])
        cov = tp.CovarianceSpec()
        s = tp.gen_threshold_sample(dgp, pers, cov, 200, seed=6)
        panel = tp.draw_innovations(cov, 200, 6)
        resid = s.y - panel.u_y
        assert np.array_equal(resid == 5.0, s.q_lag <= 0.25)

    def test_determinism_and_stream_separation(self):
        dgp, pers, cov = tp.benchmark_dgp()
        a = tp.gen_threshold_sample(dgp, pers, cov, 50, 9, 0)
        b = tp.gen_threshold_sample(dgp, pers, cov, 50, 9, 0)
        c = tp.gen_threshold_sample(dgp, pers, cov, 50, 9, 1)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.q_lag, b.q_lag)
        assert not np.array_equal(a.y, c.y)

    def test_small_sample_rejected(self):
        dgp, pers, cov = tp.benchmark_dgp()
        with pytest.raises(InvalidSampleSize):
            tp.gen_threshold_sample(dgp, pers, cov, 10, seed=0)

    def test_dimension_mismatch(self):
        dgp, pers, cov = tp.benchmark_dgp(p=2)
        bad_pers = tp.PersistenceSpec(c=[1.0], phi=[0.0])
        with pytest.raises(DimensionMismatch):
            tp.gen_threshold_sample(dgp, bad_pers, cov, 100, seed=0)

    def test_diminishing_and_fixed_effects_exclusive(self):
        with pytest.raises(tp.errors.InvalidConfig):
            tp.ThresholdDgpSpec(beta_base=np.zeros(1), delta0=np.ones(1),
                                delta_fixed=np.ones(1))

    def test_tau_domain(self):
        with pytest.raises(tp.errors.InvalidConfig):
            tp.ThresholdDgpSpec(beta_base=np.zeros(1), delta0=np.ones(1), tau=0.5)
