"""Concentrated least squares for the threshold predictive regression.

For each candidate threshold ``gamma`` the regression coefficients are
profiled out by regime-wise OLS, leaving the concentrated sum of squared
residuals ``SSR(gamma)``; the threshold estimate is the grid argmin.  Because
``SSR`` is piecewise constant between order statistics of the threshold
variable, a grid of observed order statistics is exact, not an approximation.
"""

from dataclasses import dataclass

import numpy as np

from ._moments import RCOND_TOL, ThresholdMoments, solve_ssr
from .dgp import Sample
from .errors import DegenerateThresholdVariable, EmptyRegime, InvalidConfig, RankDeficient

PARAMETERIZATIONS = ("two-regime", "base-delta")


@dataclass(frozen=True)
class ThresholdGrid:
    """Ordered candidate thresholds between two trimming quantiles."""

    pi1: float
    pi2: float
    points: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.pi1 < self.pi2 < 1.0:
            raise InvalidConfig("need 0 < pi1 < pi2 < 1")
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ThresholdFit:
    """Result of the concentrated least-squares threshold estimation."""

    gamma_hat: float
    theta1: np.ndarray
    theta2: np.ndarray
    ssr_curve: np.ndarray
    sigma2_hat: float
    grid: ThresholdGrid

    @property
    def theta_hat(self) -> np.ndarray:
        """Stacked (theta1, theta2) coefficient vector."""
        return np.concatenate([self.theta1, self.theta2])

    @property
    def ssr(self) -> float:
        return float(np.min(self.ssr_curve))

    def to_dict(self) -> dict:
        return {
            "gamma_hat": float(self.gamma_hat),
            "theta1": self.theta1.tolist(),
            "theta2": self.theta2.tolist(),
            "sigma2_hat": float(self.sigma2_hat),
            "ssr": self.ssr,
            "grid": {"pi1": self.grid.pi1, "pi2": self.grid.pi2,
                     "points": self.grid.points.tolist()},
            "ssr_curve": self.ssr_curve.tolist(),
        }


def min_regime_count(p: int) -> int:
    """Smallest admissible number of observations per regime."""
    return max(p + 2, 10)


def build_threshold_grid(sample: Sample, pi1: float = 0.15, pi2: float = 0.85) -> ThresholdGrid:
    """Candidate thresholds: order statistics of q between the trimming quantiles.

    Candidates that would leave either regime with fewer than
    ``max(p+2, 10)`` observations are dropped.  Raises
    :class:`DegenerateThresholdVariable` when no candidate survives (for
    example when q is constant).
    """
    if not 0.0 < pi1 < pi2 < 1.0:
        raise InvalidConfig("need 0 < pi1 < pi2 < 1")
    q = sample.q_lag
    lo, hi = np.quantile(q, [pi1, pi2])
    candidates = np.unique(q[(q >= lo) & (q <= hi)])
    # strictly inside the observed range, with both regimes populated
    candidates = candidates[(candidates > q.min()) & (candidates < q.max())]
    if candidates.size:
        m = min_regime_count(sample.p)
        counts = np.searchsorted(np.sort(q), candidates, side="right")
        keep = (counts >= m) & (sample.n - counts >= m)
        candidates = candidates[keep]
    if candidates.size == 0:
        raise DegenerateThresholdVariable(
            "threshold variable has no admissible candidate thresholds")
    return ThresholdGrid(pi1=pi1, pi2=pi2, points=candidates)


def build_design(sample: Sample, gamma: float, parameterization: str = "two-regime") -> np.ndarray:
    """Design matrix of the threshold regression at a fixed threshold.

    ``two-regime`` stacks the regime-1 block next to the regime-2 block
    (``[I1, x*I1, I2, x*I2]`` with an intercept); ``base-delta`` stacks the
    base block next to the regime-1 interaction (``[1, x, I1, x*I1]``).  The
    two span the same column space.

    Raises :class:`EmptyRegime` when either regime has fewer than ``p+1``
    rows.
    """
    if parameterization not in PARAMETERIZATIONS:
        raise InvalidConfig(f"parameterization must be one of {PARAMETERIZATIONS}")
    ind = (sample.q_lag <= gamma).astype(float)
    n1 = int(ind.sum())
    if min(n1, sample.n - n1) < sample.p + 1:
        raise EmptyRegime(
            f"threshold {gamma!r} leaves a regime with fewer than p+1 observations")
    x = sample.x_lag
    if parameterization == "two-regime":
        blocks1 = [ind[:, None], x * ind[:, None]] if sample.has_intercept else [x * ind[:, None]]
        inv = 1.0 - ind
        blocks2 = [inv[:, None], x * inv[:, None]] if sample.has_intercept else [x * inv[:, None]]
        return np.concatenate(blocks1 + blocks2, axis=1)
    base = [np.ones((sample.n, 1)), x] if sample.has_intercept else [x]
    inter = [ind[:, None], x * ind[:, None]] if sample.has_intercept else [x * ind[:, None]]
    return np.concatenate(base + inter, axis=1)


def ols_fit(sample: Sample, gamma: float) -> tuple[np.ndarray, float]:
    """Two-regime OLS at a fixed threshold.

    Returns the stacked coefficient vector ``(theta1, theta2)`` (intercept
    first within each regime when present) and the sum of squared residuals.
    Raises :class:`RankDeficient` when the design Gram matrix has reciprocal
    condition number below ``1e-12`` after column equilibration.
    """
    design = build_design(sample, gamma, "two-regime")
    scale = np.sqrt(np.mean(design**2, axis=0))
    scale[scale == 0.0] = 1.0
    ds = design / scale
    gram = ds.T @ ds
    eigs = np.linalg.eigvalsh(gram)
    if eigs[-1] <= 0 or eigs[0] < RCOND_TOL * eigs[-1]:
        raise RankDeficient("two-regime design is rank deficient at this threshold")
    theta_s = np.linalg.solve(gram, ds.T @ sample.y)
    theta = theta_s / scale
    resid = sample.y - design @ theta
    return theta, float(resid @ resid)


def ssr_profile(sample: Sample, grid: ThresholdGrid) -> np.ndarray:
    """Concentrated SSR at every grid point.

    Computed from cumulative regime moments after sorting by q; equals a full
    OLS refit at every point up to numerical round-off.
    """
    mom = ThresholdMoments(sample.y, sample.x_lag, sample.q_lag, intercept=sample.has_intercept)
    counts = mom.counts(grid.points)
    blocks = mom.regime_blocks(counts)
    ssr1, _ = solve_ssr(blocks["WW1"], blocks["Wy1"], blocks["yy1"])
    ssr2, _ = solve_ssr(blocks["WW2"], blocks["Wy2"], blocks["yy2"])
    return ssr1 + ssr2


def estimate_threshold(sample: Sample, grid: ThresholdGrid | None = None) -> ThresholdFit:
    """Estimate the threshold location by grid argmin of the concentrated SSR.

    Ties are broken toward the smallest candidate.  The regime coefficients
    and residual variance are re-computed by a full OLS fit at the selected
    threshold.
    """
    if grid is None:
        grid = build_threshold_grid(sample)
    curve = ssr_profile(sample, grid)
    j = int(np.argmin(curve))
    gamma_hat = float(grid.points[j])
    theta, ssr = ols_fit(sample, gamma_hat)
    k = sample.p + (1 if sample.has_intercept else 0)
    return ThresholdFit(
        gamma_hat=gamma_hat,
        theta1=theta[:k],
        theta2=theta[k:],
        ssr_curve=curve,
        sigma2_hat=ssr / sample.n,
        grid=grid,
    )
