"""Self-generated instruments that filter out regressor persistence.

The instrument applies an exponentially damped filter to the regressor
differences, ``z_t = rho_z z_{t-1} + (x_t - x_{t-1})`` with
``rho_z = 1 - c_z / n**gamma_z``, producing a mildly integrated series whose
use as an instrument removes the unknown persistence from the limit theory
of the predictability tests.

For regressors whose autocorrelation coefficient carries the stochastic
perturbation, the filtered differences decompose into the innovation-filtered
series plus three correction components driven by the level, the shock, and
the squared shock; :func:`build_corrected_instrument` returns all components
separately.  When the path follows the expanded-quadratic coefficient form,
the recombined series is identical to the plain filter applied to the
realized differences.
"""

from dataclasses import dataclass

import numpy as np

from ._moments import RCOND_TOL
from .dgp import RegressorPath, Sample
from .errors import (
    EmptyRegime,
    InvalidConfig,
    MissingExogenousDraws,
    NearSingularInstrumentGram,
)
from .estimate import build_design
from .rng import derive_rng


@dataclass(frozen=True)
class IvxConfig:
    """Instrument filter parameters: damping ``c_z > 0``, exponent in (0, 1)."""

    c_z: float = 1.0
    gamma_z: float = 0.95

    def __post_init__(self):
        if not self.c_z > 0:
            raise InvalidConfig("c_z must be positive")
        if not 0.0 < self.gamma_z < 1.0:
            raise InvalidConfig("gamma_z must lie in (0, 1)")

    def rho(self, horizon: int) -> float:
        """Filter coefficient ``1 - c_z / horizon**gamma_z``."""
        return 1.0 - self.c_z / float(horizon) ** self.gamma_z

    def to_dict(self) -> dict:
        return {"c_z": self.c_z, "gamma_z": self.gamma_z}


def build_instrument(x: np.ndarray, cfg: IvxConfig, horizon: int | None = None) -> np.ndarray:
    """Filtered-difference instrument series for a regressor series.

    Parameters
    ----------
    x : (m,) or (m, p) array
        Regressor levels; needs at least 2 points.
    cfg : IvxConfig
    horizon : int, optional
        Sample size entering the filter coefficient; defaults to the number
        of increments ``m - 1``.

    Returns
    -------
    z : array of the same shape as ``x``
        ``z[0] = 0`` and ``z[i] = rho_z z[i-1] + (x[i] - x[i-1])``; entry i
        uses information through time i.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise InvalidConfig("instrument needs a series with at least 2 points")
    rho = cfg.rho(horizon if horizon is not None else x.shape[0] - 1)
    dx = np.diff(x, axis=0)
    z = np.zeros_like(x)
    for i in range(dx.shape[0]):
        z[i + 1] = rho * z[i] + dx[i]
    return z


@dataclass(frozen=True)
class CorrectedInstrument:
    """Instrument components for a stochastic-coefficient regressor path.

    ``combined[s] = z[s] + (c/n) eta1[s] + eta2[s]/sqrt(n) + eta3[s]/(2n)``
    where ``z`` filters the raw innovations, ``eta1`` the lagged levels,
    ``eta2`` the shock-weighted lagged levels and ``eta3`` the
    squared-shock-weighted lagged levels.  All series share the indexing of
    the path (entry s uses information through time s).
    """

    z: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    eta3: np.ndarray
    combined: np.ndarray
    rho_z: float


def build_corrected_instrument(path: RegressorPath, cfg: IvxConfig) -> CorrectedInstrument:
    """Instrument with the stochastic-coefficient correction components.

    Requires the path to carry its generating innovations (for the stored
    coefficient shocks); raises :class:`MissingExogenousDraws` otherwise.
    """
    if path.innovations is None:
        raise MissingExogenousDraws("path does not carry its innovation panel")
    n, p = path.n, path.p
    rho = cfg.rho(n)
    u_x = path.innovations.u_x[:n]
    w = path.innovations.u_phi[:n] @ path.spec.phi  # shock projection, t = 1..n
    x_lag = path.x[:-1]
    c = path.spec.c

    z = np.zeros((n + 1, p))
    e1 = np.zeros((n + 1, p))
    e2 = np.zeros((n + 1, p))
    e3 = np.zeros((n + 1, p))
    for s in range(n):
        z[s + 1] = rho * z[s] + u_x[s]
        e1[s + 1] = rho * e1[s] + x_lag[s]
        e2[s + 1] = rho * e2[s] + w[s] * x_lag[s]
        e3[s + 1] = rho * e3[s] + w[s] ** 2 * x_lag[s]
    combined = z + (c[None, :] / n) * e1 + e2 / np.sqrt(n) + e3 / (2.0 * n)
    return CorrectedInstrument(z=z, eta1=e1, eta2=e2, eta3=e3, combined=combined, rho_z=rho)


@dataclass(frozen=True)
class IvxFit:
    """Regime-wise instrumental-variable fit at a fixed threshold."""

    gamma: float
    theta1: np.ndarray
    theta2: np.ndarray
    avar: np.ndarray
    z_path: np.ndarray
    sigma2_hat: float
    corrected: bool
    has_intercept: bool
    p: int

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.theta1, self.theta2])

    @property
    def beta_ivx(self) -> np.ndarray:
        """Regime slope estimates stacked as (beta1, beta2)."""
        if self.has_intercept:
            return np.concatenate([self.theta1[1:], self.theta2[1:]])
        return self.theta

    def to_dict(self) -> dict:
        return {
            "gamma": float(self.gamma),
            "theta1": self.theta1.tolist(),
            "theta2": self.theta2.tolist(),
            "beta_ivx": self.beta_ivx.tolist(),
            "sigma2_hat": float(self.sigma2_hat),
            "avar": self.avar.tolist(),
            "corrected": bool(self.corrected),
        }


def instrument_series(sample: Sample, cfg: IvxConfig, corrected: bool = False) -> np.ndarray:
    """Instrument column aligned with ``sample.x_lag`` rows.

    Row t of the sample holds the predictor lagged once, so its instrument is
    the filter evaluated one step earlier as well.
    """
    if corrected:
        if sample.path is None:
            raise MissingExogenousDraws(
                "corrected instrument requires a sample generated with its path attached")
        comp = build_corrected_instrument(sample.path, cfg)
        return comp.combined[: sample.n]
    return build_instrument(sample.x_lag, cfg, horizon=sample.n)


def ivx_fit(
    sample: Sample,
    gamma: float,
    cfg: IvxConfig | None = None,
    corrected: bool = False,
    sigma2: float | None = None,
) -> IvxFit:
    """Instrumental-variable estimation of the two-regime model at ``gamma``.

    The instrument matrix mirrors the regression design with the filtered
    series replacing the regressor, so intercepts are instrumented by
    themselves; this is equivalent to regime-wise partialling-out of the
    intercepts with the raw (un-demeaned) instrument.  The asymptotic
    covariance is the sandwich
    ``sigma2 * (Z'X)^-1 (Z'Z) (X'Z)^-1`` with regime-blocked Z and X.

    Parameters
    ----------
    sample : Sample
    gamma : float
        Threshold; both regimes must contain at least p+1 observations.
    cfg : IvxConfig, optional
    corrected : bool
        Use the stochastic-coefficient corrected instrument (requires the
        generating path on the sample).
    sigma2 : float, optional
        Error-variance estimate for the sandwich; defaults to the mean
        squared IV residual.
    """
    cfg = cfg or IvxConfig()
    z = instrument_series(sample, cfg, corrected=corrected)
    X = build_design(sample, gamma, "two-regime")
    zsample = Sample(y=sample.y, x_lag=z, q_lag=sample.q_lag,
                     has_intercept=sample.has_intercept)
    Z = build_design(zsample, gamma, "two-regime")

    sx = np.sqrt(np.mean(X**2, axis=0))
    sx[sx == 0.0] = 1.0
    sz = np.sqrt(np.mean(Z**2, axis=0))
    sz[sz == 0.0] = 1.0
    Xs, Zs = X / sx, Z / sz

    ZX = Zs.T @ Xs
    svals = np.linalg.svd(ZX, compute_uv=False)
    if svals[-1] < RCOND_TOL * svals[0] or svals[0] == 0.0:
        raise NearSingularInstrumentGram(
            "instrument/regressor cross-moment matrix is numerically singular")
    theta_s = np.linalg.solve(ZX, Zs.T @ sample.y)
    theta = theta_s / sx
    resid = sample.y - X @ theta
    s2 = float(resid @ resid) / sample.n if sigma2 is None else float(sigma2)
    K = np.linalg.inv(ZX)
    V_s = s2 * K @ (Zs.T @ Zs) @ K.T
    V = V_s / np.outer(sx, sx)

    k = sample.p + (1 if sample.has_intercept else 0)
    return IvxFit(
        gamma=float(gamma),
        theta1=theta[:k],
        theta2=theta[k:],
        avar=V,
        z_path=z,
        sigma2_hat=s2,
        corrected=corrected,
        has_intercept=sample.has_intercept,
        p=sample.p,
    )


def draw_filtered_shock_limit(
    cfg: IvxConfig,
    phi,
    omega_phiphi,
    draws: int,
    seed: int,
) -> np.ndarray:
    """Draws from the Gaussian limit of the filtered coefficient-shock sums.

    The filtered partial sums of the projected shocks are asymptotically
    ``N(0, phi' Omega phi / (2 c_z))``; the positive-variance convention is
    used.
    """
    if draws < 1:
        raise InvalidConfig("draws must be at least 1")
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    omega = np.atleast_2d(np.asarray(omega_phiphi, dtype=float))
    var = float(phi @ omega @ phi) / (2.0 * cfg.c_z)
    rng = derive_rng(seed, "filtered-shock-limit")
    return np.sqrt(var) * rng.standard_normal(draws)


def _regime_counts_ok(sample: Sample, gamma: float) -> bool:
    n1 = int(np.sum(sample.q_lag <= gamma))
    return min(n1, sample.n - n1) >= sample.p + 1


__all__ = [
    "IvxConfig",
    "IvxFit",
    "CorrectedInstrument",
    "build_instrument",
    "build_corrected_instrument",
    "instrument_series",
    "ivx_fit",
    "draw_filtered_shock_limit",
]
