"""Simulation of stochastic local-unit-root regressors and threshold samples.

The regressor recursion is ``x_t = rho_nt * x_{t-1} + u_xt`` where the
autocorrelation coefficient drifts around unity and is perturbed each period
by an exogenous shock:

* ``exact`` form:     ``rho_nt = exp(c/n + w_t/sqrt(n))``
* ``expanded`` form:  ``rho_nt = (1 + c/n) + w_t/sqrt(n) + w_t**2/(2n)``

with ``w_t = phi' u_phi,t`` the projected coefficient shock.  The expanded
form is the second-order expansion of the exact one; the two differ by
``O(n^{-3/2})`` per step.  Positive ``c`` puts the process on the locally
explosive side of unity.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidConfig,
    InvalidSampleSize,
    OverflowDetected,
)
from .innovations import CovarianceSpec, InnovationPanel, draw_innovations
from .rng import derive_rng

_FORMS = ("exact", "expanded")
_OVERFLOW_LIMIT = 1e200


@dataclass(frozen=True)
class PersistenceSpec:
    """Persistence parameters of the regressor recursion.

    Parameters
    ----------
    c : (p,) array_like
        Localizing coefficients, one per regressor.  Positive values give
        locally explosive paths; zero or negative values are allowed and
        cover the local-to-unity and stationary special cases.
    phi : (d,) array_like
        Loadings on the exogenous coefficient shocks.  ``phi = 0`` removes
        the stochastic perturbation and both forms reduce to the
        deterministic local-to-unity coefficient.
    form : {"exact", "expanded"}
        Coefficient form, see module docstring.
    """

    c: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    phi: np.ndarray = field(default_factory=lambda: np.array([0.0]))
    form: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "c", np.atleast_1d(np.asarray(self.c, dtype=float)))
        object.__setattr__(self, "phi", np.atleast_1d(np.asarray(self.phi, dtype=float)))
        if self.form not in _FORMS:
            raise InvalidConfig(f"form must be one of {_FORMS}, got {self.form!r}")

    @property
    def p(self) -> int:
        return self.c.shape[0]

    @property
    def d(self) -> int:
        return self.phi.shape[0]

    def to_dict(self) -> dict:
        return {"c": self.c.tolist(), "phi": self.phi.tolist(), "form": self.form}


@dataclass(frozen=True)
class RegressorPath:
    """A simulated regressor path together with everything that generated it.

    ``x`` holds ``x_0 .. x_n`` (shape ``(n+1, p)``); ``rho`` holds the
    realized time-t coefficients (shape ``(n, p)``), so the recursion can be
    re-checked against the stored innovations to machine precision.
    """

    x: np.ndarray
    rho: np.ndarray
    spec: PersistenceSpec
    innovations: InnovationPanel

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def recursion_error(self) -> float:
        """Max relative error of ``x_t - (rho_t * x_{t-1} + u_xt)``."""
        u_x = self.innovations.u_x[: self.n]
        rebuilt = self.rho * self.x[:-1] + u_x
        scale = np.maximum(np.abs(self.x[1:]), 1.0)
        return float(np.max(np.abs(self.x[1:] - rebuilt) / scale))


def realized_rho(spec: PersistenceSpec, u_phi: np.ndarray, n: int) -> np.ndarray:
    """Per-period autocorrelation coefficients, shape ``(n, p)``.

    ``u_phi`` rows are the coefficient shocks for t = 1..n.
    """
    w = u_phi[:n] @ spec.phi  # (n,)
    c = spec.c[None, :]
    if spec.form == "exact":
        return np.exp(c / n + w[:, None] / np.sqrt(n))
    return (1.0 + c / n) + w[:, None] / np.sqrt(n) + (w[:, None] ** 2) / (2.0 * n)


def gen_regressor_path(
    spec: PersistenceSpec,
    innovations: InnovationPanel,
    n: int,
    x0: np.ndarray | None = None,
) -> RegressorPath:
    """Simulate the regressor recursion from an innovation panel.

    Parameters
    ----------
    spec : PersistenceSpec
    innovations : InnovationPanel
        Must have at least ``n`` rows and dimensions matching ``spec``.
    n : int
        Path length; the result holds ``x_0 .. x_n``.
    x0 : (p,) array_like, optional
        Initial condition, zero by default.  With ``x0 = 0`` the first step
        reduces to ``x_1 = u_x1``.

    Raises
    ------
    DimensionMismatch
        If panel dimensions are inconsistent with the spec.
    OverflowDetected
        If the path leaves the representable floating-point range, which can
        happen for strongly explosive configurations.
    """
    if innovations.n < n:
        raise DimensionMismatch(f"innovation panel has {innovations.n} rows, need {n}")
    if innovations.p != spec.p or innovations.d != spec.d:
        raise DimensionMismatch("innovation panel dimensions do not match the persistence spec")
    p = spec.p
    rho = realized_rho(spec, innovations.u_phi, n)
    u_x = innovations.u_x[:n]
    x = np.empty((n + 1, p))
    x[0] = np.zeros(p) if x0 is None else np.asarray(x0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(n):
            x[t + 1] = rho[t] * x[t] + u_x[t]
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _OVERFLOW_LIMIT:
        raise OverflowDetected("regressor path exceeded the floating-point range")
    return RegressorPath(x=x, rho=rho, spec=spec, innovations=innovations)


@dataclass(frozen=True)
class Sample:
    """Aligned estimation arrays for the threshold predictive regression.

    Row t holds ``(y_t, x_{t-1}, q_{t-1})``: the threshold indicator carries
    the same lag as the predictor.
    """

    y: np.ndarray
    x_lag: np.ndarray
    q_lag: np.ndarray
    has_intercept: bool = True
    path: RegressorPath | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x_lag, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        q = np.asarray(self.q_lag, dtype=float).reshape(-1)
        if not (len(y) == len(x) == len(q)):
            raise DimensionMismatch("y, x_lag and q_lag must share length")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x)) and np.all(np.isfinite(q))):
            raise DimensionMismatch("sample arrays must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x_lag", x)
        object.__setattr__(self, "q_lag", q)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x_lag.shape[1]


@dataclass(frozen=True)
class ThresholdDgpSpec:
    """Response-equation parameters of the simulated threshold regression.

    The regime-1 (``q <= gamma0``) slope is ``beta_base + delta_n`` and the
    regime-2 slope is ``beta_base``, where the regime difference is either a
    fixed vector (``delta_fixed``) or the diminishing form
    ``delta_n = delta0 * n**(-tau)`` with ``tau in [0, 1/2)``.
    """

    alpha: tuple[float, float] = (0.0, 0.0)
    beta_base: np.ndarray = field(default_factory=lambda: np.array([0.0]))
    delta0: np.ndarray | None = None
    tau: float = 0.25
    delta_fixed: np.ndarray | None = None
    gamma0: float = 0.25
    threshold_dist: str = "standard_normal"

    def __post_init__(self):
        object.__setattr__(self, "beta_base", np.atleast_1d(np.asarray(self.beta_base, dtype=float)))
        if self.delta0 is not None:
            object.__setattr__(self, "delta0", np.atleast_1d(np.asarray(self.delta0, dtype=float)))
        if self.delta_fixed is not None:
            object.__setattr__(self, "delta_fixed", np.atleast_1d(np.asarray(self.delta_fixed, dtype=float)))
        if self.delta0 is not None and self.delta_fixed is not None:
            raise InvalidConfig("give either delta0 (diminishing) or delta_fixed, not both")
        if self.delta0 is not None and not 0.0 <= self.tau < 0.5:
            raise InvalidConfig("tau must lie in [0, 1/2)")
        if self.threshold_dist != "standard_normal":
            raise InvalidConfig("only the standard_normal threshold distribution is implemented")

    @property
    def p(self) -> int:
        return self.beta_base.shape[0]

    def regime_slopes(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(regime-1 slope, regime-2 slope) at sample size n."""
        base = self.beta_base
        if self.delta_fixed is not None:
            return base + self.delta_fixed, base
        if self.delta0 is not None:
            return base + self.delta0 * float(n) ** (-self.tau), base
        return base, base

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "beta_base": self.beta_base.tolist(),
            "delta0": None if self.delta0 is None else self.delta0.tolist(),
            "tau": self.tau,
            "delta_fixed": None if self.delta_fixed is None else self.delta_fixed.tolist(),
            "gamma0": self.gamma0,
            "threshold_dist": self.threshold_dist,
        }


def assemble_threshold_sample(
    dgp: ThresholdDgpSpec,
    path: RegressorPath,
    q: np.ndarray,
    u_y: np.ndarray,
    has_intercept: bool = True,
) -> Sample:
    """Build the aligned sample from a path, threshold draws and errors.

    ``y_t = alpha_i + beta_i' x_{t-1} + u_yt`` with the regime picked by
    ``q_{t-1} <= gamma0``; with ``u_y = 0`` the regressand reproduces the
    regime conditional means exactly.
    """
    n = path.n
    q = np.asarray(q, dtype=float).reshape(-1)
    u_y = np.asarray(u_y, dtype=float).reshape(-1)
    if q.shape[0] != n or u_y.shape[0] != n:
        raise DimensionMismatch("q and u_y must have one entry per path step")
    beta1, beta2 = dgp.regime_slopes(n)
    x_lag = path.x[:-1]
    regime1 = q <= dgp.gamma0
    alpha = np.where(regime1, dgp.alpha[0], dgp.alpha[1])
    slope_term = np.where(regime1, x_lag @ beta1, x_lag @ beta2)
    y = alpha + slope_term + u_y
    return Sample(y=y, x_lag=x_lag, q_lag=q, has_intercept=has_intercept, path=path)


def gen_threshold_sample(
    dgp: ThresholdDgpSpec,
    pers: PersistenceSpec,
    cov: CovarianceSpec,
    n: int,
    seed: int,
    *path,
    has_intercept: bool = True,
) -> Sample:
    """Simulate one aligned threshold predictive regression sample.

    The threshold variable is standard normal and independent of the
    innovations.  Returns a :class:`Sample` that keeps a reference to the
    generating :class:`RegressorPath`.
    """
    if n < 20:
        raise InvalidSampleSize(f"need n >= 20, got {n}")
    if dgp.p != pers.p or pers.p != cov.p or pers.d != cov.d:
        raise DimensionMismatch("dgp/persistence/covariance dimensions disagree")
    panel = draw_innovations(cov, n, seed, *path)
    reg_path = gen_regressor_path(pers, panel, n)
    q_rng = derive_rng(seed, *path, "threshold-variable")
    q = q_rng.standard_normal(n)  # q_0 .. q_{n-1}, aligned with x_lag rows
    return assemble_threshold_sample(dgp, reg_path, q, panel.u_y[:n],
                                     has_intercept=has_intercept)


# -- canonical simulation-study presets --------------------------------------

#: Named persistence scenarios used in the experiment harness.  The values
#: are this package's calibration of the qualitative descriptions (degree of
#: the local-to-unity component relative to the unit boundary).
PERSISTENCE_SCENARIOS = {
    "mildly-integrated": -1.0,
    "mildly-explosive": 2.0,
    "near-nonstationary": -10.0,
}


def benchmark_dgp(
    c: float = 1.0,
    phi: float = 0.25,
    p: int = 2,
    endogeneity: float = 0.0,
    delta0: float = 2.0,
    tau: float = 0.25,
    gamma0: float = 0.25,
    null: bool = False,
) -> tuple[ThresholdDgpSpec, PersistenceSpec, CovarianceSpec]:
    """Benchmark data generating process for the simulation studies.

    Regime-1 slope ``delta0 * n**(-tau)`` on every regressor (zero base
    slope, zero intercepts), true threshold ``gamma0 = 0.25``, unit-variance
    Gaussian innovations, one exogenous coefficient shock shared by all
    regressors, and the exact-exponential coefficient form.  ``null=True``
    removes the threshold effect entirely (``delta = 0``), which is the size
    configuration for the predictability tests.

    ``endogeneity`` sets the covariance between each regressor innovation and
    the regression error.
    """
    dgp = ThresholdDgpSpec(
        alpha=(0.0, 0.0),
        beta_base=np.zeros(p),
        delta0=None if null else np.full(p, float(delta0)),
        tau=tau,
        gamma0=gamma0,
    )
    pers = PersistenceSpec(c=np.full(p, float(c)), phi=np.array([float(phi)]), form="exact")
    cov = CovarianceSpec(
        sigma_y=1.0,
        sigma_xx=np.eye(p),
        sigma_phiphi=np.eye(1),
        cross_xy=np.full(p, float(endogeneity)) if endogeneity else None,
    )
    return dgp, pers, cov
