import numpy as np
import pytest

import threshpred as tp
from threshpred.errors import DimensionMismatch, InvalidSampleSize, NotPositiveDefinite


def cov_entry_se(sigma, n):
    """Standard error of each sample-covariance entry for Gaussian draws."""
    diag = np.diag(sigma)
    return np.sqrt((np.outer(diag, diag) + sigma**2) / n)


class TestAssembleCovariance:
    def test_block_diagonal_unit_case_is_identity(self):
        spec = tp.CovarianceSpec(sigma_y=1.0, sigma_xx=np.eye(1), sigma_phiphi=np.eye(1))
        assert np.array_equal(tp.assemble_covariance(spec), np.eye(3))

    def test_cross_xy_entry_and_positive_definiteness(self):
        spec = tp.CovarianceSpec(sigma_y=1.0, sigma_xx=np.eye(1), sigma_phiphi=np.eye(1),
                                 cross_xy=[0.9])
        sigma = tp.assemble_covariance(spec)
        assert sigma[0, 1] == sigma[1, 0] == 0.9
        # independent oracle: direct eigen decomposition of the 3x3 matrix
        assert np.all(np.linalg.eigvalsh(sigma) > 0)

    def test_too_large_cross_is_rejected(self):
        # 2x2 principal minor 1 - 1.21 < 0 by hand
        with pytest.raises(NotPositiveDefinite):
            tp.assemble_covariance(tp.CovarianceSpec(cross_xy=[1.1]))

    def test_cross_blocks_placed_symmetrically(self):
        spec = tp.CovarianceSpec(sigma_y=2.0, sigma_xx=np.diag([1.0, 2.0]),
                                 sigma_phiphi=np.eye(1), cross_xy=[0.3, -0.2],
                                 cross_xphi=[[0.1], [0.2]])
        sigma = tp.assemble_covariance(spec)
        assert np.allclose(sigma, sigma.T)
        assert sigma[0, 0] == 2.0
        assert np.allclose(sigma[1:3, 0], [0.3, -0.2])
        assert np.allclose(sigma[1:3, 3], [0.1, 0.2])
        assert sigma[0, 3] == 0.0  # no error/shock cross block

    def test_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            tp.CovarianceSpec(sigma_xx=np.eye(2), cross_xy=[0.5])


class TestDrawInnovations:
    def test_large_sample_covariance_matches_identity(self):
        spec = tp.CovarianceSpec()
        panel = tp.draw_innovations(spec, 100_000, seed=7)
        emp = np.cov(panel.draws, rowvar=False)
        assert np.max(np.abs(emp - np.eye(3))) < 0.02

    def test_every_entry_within_three_standard_errors(self):
        spec = tp.CovarianceSpec(sigma_y=1.5, sigma_xx=np.diag([1.0, 0.5]),
                                 sigma_phiphi=np.eye(1), cross_xy=[0.4, 0.1])
        n = 100_000
        sigma = tp.assemble_covariance(spec)
        panel = tp.draw_innovations(spec, n, seed=11)
        emp = panel.draws.T @ panel.draws / n
        assert np.all(np.abs(emp - sigma) < 3.0 * cov_entry_se(sigma, n))

    def test_zero_cross_blocks_statistically_zero(self):
        spec = tp.CovarianceSpec(sigma_xx=np.eye(2))
        n = 100_000
        sigma = tp.assemble_covariance(spec)
        panel = tp.draw_innovations(spec, n, seed=13)
        emp = panel.draws.T @ panel.draws / n
        off = ~np.eye(4, dtype=bool)
        assert np.all(np.abs(emp[off]) < 3.0 * cov_entry_se(sigma, n)[off])

    def test_determinism(self):
        spec = tp.CovarianceSpec(cross_xy=[0.5])
        a = tp.draw_innovations(spec, 500, seed=3)
        b = tp.draw_innovations(spec, 500, seed=3)
        assert np.array_equal(a.draws, b.draws)
        c = tp.draw_innovations(spec, 500, seed=4)
        assert not np.array_equal(a.draws, c.draws)

    def test_path_components_give_independent_streams(self):
        spec = tp.CovarianceSpec()
        a = tp.draw_innovations(spec, 100, 3, 0)
        b = tp.draw_innovations(spec, 100, 3, 1)
        assert not np.array_equal(a.draws, b.draws)

    def test_degenerate_sample_size(self):
        with pytest.raises(InvalidSampleSize):
            tp.draw_innovations(tp.CovarianceSpec(), 1, seed=0)

    def test_panel_views_and_immutability(self):
        spec = tp.CovarianceSpec(sigma_xx=np.eye(2), sigma_phiphi=np.eye(1))
        panel = tp.draw_innovations(spec, 50, seed=1)
        assert panel.u_y.shape == (50,)
        assert panel.u_x.shape == (50, 2)
        assert panel.u_phi.shape == (50, 1)
        with pytest.raises(ValueError):
            panel.draws[0, 0] = 1.0

    def test_propagates_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            tp.draw_innovations(tp.CovarianceSpec(cross_xy=[1.1]), 100, seed=0)
