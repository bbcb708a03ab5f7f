import numpy as np
import pytest

import threshpred as tp


@pytest.fixture
def unit_cov():
    return tp.CovarianceSpec()


def make_sample(n=200, p=1, c=1.0, phi=0.25, seed=5, delta0=None, tau=0.25,
                alpha=(0.0, 0.0), endogeneity=0.0, gamma0=0.25, beta_base=None,
                has_intercept=True, rep=0):
    """Convenience threshold-sample builder used across the test modules."""
    dgp = tp.ThresholdDgpSpec(
        alpha=alpha,
        beta_base=np.zeros(p) if beta_base is None else np.asarray(beta_base, dtype=float),
        delta0=None if delta0 is None else np.full(p, float(delta0)),
        tau=tau,
        gamma0=gamma0,
    )
    pers = tp.PersistenceSpec(c=np.full(p, float(c)), phi=np.array([float(phi)]))
    cov = tp.CovarianceSpec(
        sigma_xx=np.eye(p),
        cross_xy=np.full(p, endogeneity) if endogeneity else None,
    )
    return tp.gen_threshold_sample(dgp, pers, cov, n, seed, rep,
                                   has_intercept=has_intercept)
