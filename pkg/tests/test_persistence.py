import numpy as np
import pytest

import threshpred as tp
from threshpred.errors import DimensionMismatch, InvalidConfig
from threshpred.rng import derive_rng


def make_path(c=2.0, phi=0.25, n=500, seed=2, sigma_x=1.0):
    cov = tp.CovarianceSpec(sigma_xx=np.array([[sigma_x**2]]))
    panel = tp.draw_innovations(cov, n, seed)
    spec = tp.PersistenceSpec(c=[c], phi=[phi])
    return tp.gen_regressor_path(spec, panel, n), panel.u_phi[:n]


def grid_oracle(x, exog, c_range, phi_range, points=200):
    """Dense lattice scan of the one-step squared-residual objective."""
    n = x.shape[0] - 1
    cs = np.linspace(*c_range, points)
    phis = np.linspace(*phi_range, points)
    best = (np.inf, None, None)
    xlag, xlead = x[:-1], x[1:]
    for phi in phis:
        shock = np.exp(phi * exog[:, 0] / np.sqrt(n))
        # vectorized over the c axis
        resid = xlead[None, :] - np.exp(cs / n)[:, None] * shock[None, :] * xlag[None, :]
        vals = np.einsum("cn,cn->c", resid, resid)
        j = int(np.argmin(vals))
        if vals[j] < best[0]:
            best = (float(vals[j]), float(cs[j]), float(phi))
    return best


class TestObjective:
    def test_zero_at_truth_for_noiseless_path(self):
        n = 200
        draws = np.zeros((n, 3))
        rng = derive_rng(3)
        draws[:, 2] = rng.standard_normal(n)
        panel = tp.InnovationPanel(n=n, p=1, d=1, draws=draws, seed=0)
        spec = tp.PersistenceSpec(c=[1.5], phi=[0.3])
        path = tp.gen_regressor_path(spec, panel, n, x0=np.array([1.0]))
        assert tp.nlls_objective(path, panel.u_phi, 1.5, [0.3]) == 0.0

    def test_matches_explicit_loop(self):
        path, exog = make_path(n=100, seed=5)
        c, phi = 0.7, 0.1
        val = tp.nlls_objective(path, exog, c, phi)
        n = 100
        total = 0.0
        for t in range(1, n + 1):
            rho = np.exp(c / n + phi * exog[t - 1, 0] / np.sqrt(n))
            total += (path.x[t, 0] - rho * path.x[t - 1, 0]) ** 2
        assert abs(val - total) <= 1e-12 * total

    def test_phi_zero_reduces_to_lur_criterion(self):
        path, exog = make_path(n=100, seed=6)
        c = 1.2
        val = tp.nlls_objective(path, exog, c, [0.0])
        x = path.x[:, 0]
        lur = np.sum((x[1:] - np.exp(c / 100) * x[:-1]) ** 2)
        assert val == pytest.approx(lur, rel=1e-14)

    def test_dimension_checks(self):
        path, exog = make_path(n=50)
        with pytest.raises(DimensionMismatch):
            tp.nlls_objective(path, exog, 1.0, [0.1, 0.2])
        with pytest.raises(DimensionMismatch):
            tp.nlls_objective(path, exog[:10], 1.0, [0.1])


class TestFitPersistence:
    def test_exact_recovery_zero_noise(self):
        n = 400
        draws = np.zeros((n, 3))
        rng = derive_rng(7)
        draws[:, 2] = rng.standard_normal(n)
        panel = tp.InnovationPanel(n=n, p=1, d=1, draws=draws, seed=0)
        spec = tp.PersistenceSpec(c=[2.0], phi=[0.25])
        path = tp.gen_regressor_path(spec, panel, n, x0=np.array([1.0]))
        fit = tp.fit_persistence(path, panel.u_phi, init=(1.0, [0.1]))
        assert fit.converged
        assert abs(fit.c_hat - 2.0) < 1e-6
        assert abs(fit.phi_hat[0] - 0.25) < 1e-8

    def test_init_at_truth_converges_fast_with_descent(self):
        path, exog = make_path(c=2.0, phi=0.25, n=2000, seed=8)
        fit = tp.fit_persistence(path, exog, init=(2.0, [0.25]))
        assert fit.converged
        assert fit.iterations <= 3
        assert fit.objective <= tp.nlls_objective(path, exog, 2.0, [0.25])

    def test_objective_never_worse_than_init(self):
        path, exog = make_path(c=1.0, phi=0.4, n=300, seed=9)
        init = (-3.0, [0.9])
        fit = tp.fit_persistence(path, exog, init=init)
        assert fit.objective <= tp.nlls_objective(path, exog, init[0], init[1])

    def test_recovery_against_grid_search_band(self):
        # the localizing coefficient has O_p(1) estimation dispersion even at
        # n=2000, so truth-recovery is not the contract; agreement with a
        # dense lattice scan of the same objective is
        path, exog = make_path(c=2.0, phi=0.25, n=2000, seed=10, sigma_x=0.05)
        fit = tp.fit_persistence(path, exog)
        obj_g, c_g, phi_g = grid_oracle(path.x[:, 0], exog, (-20.0, 20.0), (-2.0, 2.0))
        assert abs(fit.c_hat - c_g) <= 40.0 / 199 + 1e-9
        assert abs(fit.phi_hat[0] - phi_g) <= 4.0 / 199 + 1e-9
        assert fit.objective <= obj_g + 1e-9

    def test_randomized_suite_beats_grid_oracle(self):
        rng = derive_rng(11)
        for case in range(50):
            c = float(rng.uniform(0.2, 4.0))
            phi = float(rng.uniform(-0.5, 0.5))
            path, exog = make_path(c=c, phi=phi, n=500, seed=1000 + case)
            fit = tp.fit_persistence(path, exog)
            obj_g, *_ = grid_oracle(path.x[:, 0], exog, (-5.0, 8.0), (-1.0, 1.0),
                                    points=200)
            assert fit.objective <= obj_g + 1e-6

    def test_consistency_direction_with_sample_size(self):
        """Estimation error trends on matched seeds as n grows.

        The shock loading is consistently estimable and its error shrinks
        monotonically.  The localizing coefficient is not: its estimation
        error converges to a nondegenerate law, so its dispersion stays
        bounded away from zero instead of vanishing.
        """
        B = 500
        phi_abs = {}
        c_abs = {}
        for n in (250, 1000, 4000):
            errs_phi = np.empty(B)
            errs_c = np.empty(B)
            for r in range(B):
                path, exog = make_path(c=2.0, phi=0.25, n=n, seed=50_000 + r)
                fit = tp.fit_persistence(path, exog, init=(2.0, [0.25]))
                errs_phi[r] = fit.phi_hat[0] - 0.25
                errs_c[r] = fit.c_hat - 2.0
            phi_abs[n] = float(np.mean(np.abs(errs_phi)))
            c_abs[n] = float(np.mean(np.abs(errs_c)))
        assert phi_abs[4000] < phi_abs[1000] < phi_abs[250]
        # O_p(1) dispersion for the localizing coefficient: bounded, not
        # vanishing
        assert 0.5 < c_abs[4000] < 5.0
        assert c_abs[4000] > 0.5 * c_abs[250]

    def test_init_outside_bounds_rejected(self):
        path, exog = make_path(n=100)
        with pytest.raises(InvalidConfig):
            tp.fit_persistence(path, exog, init=(100.0, None))
