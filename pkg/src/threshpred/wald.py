"""Wald and sup-Wald statistics for threshold predictability testing.

Two null hypotheses are supported:

* ``linearity``: no threshold effect.  The unrestricted model is the full
  two-regime regression; the restriction sets the intercept shift and slope
  shift between regimes to zero (p+1 restrictions with an intercept, p
  without).
* ``joint``: no threshold effect and no predictability.  The unrestricted
  model keeps a single common intercept and regime-specific slopes,
  ``y = a + b1'x I(q<=g) + b2'x I(q>g) + u``; the restriction sets both
  regime slopes to zero (2p restrictions).  Maintaining a common intercept
  keeps the statistic aligned with its pivotal instrumented limit law.

The predictability-only statistic (both regime slopes zero, intercepts free
in each regime) is used after the threshold location has been estimated.

All statistics studentize with the residual variance of the hypothesis's
unrestricted model at the evaluated threshold, ``SSR_unrestricted / n``.
Least-squares Walds are computed as ``(SSR_r - SSR_u) / sigma2_hat``, which
is algebraically identical to the quadratic form in the restricted
coefficients; instrumented Walds use the explicit quadratic form with the
sandwich covariance ``sigma2 (Z'X)^-1 (Z'Z) (X'Z)^-1``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._moments import RCOND_TOL, ThresholdMoments, solve_ssr
from .dgp import Sample
from .errors import EmptyRegime, InvalidConfig, NearSingularInstrumentGram
from .estimate import ThresholdGrid, build_threshold_grid, ssr_profile
from .ivx import IvxConfig, instrument_series

_KINDS = ("linearity", "joint")


@dataclass(frozen=True)
class Hypothesis:
    """Null hypothesis of a threshold predictability test."""

    kind: str = "linearity"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidConfig(f"hypothesis kind must be one of {_KINDS}")

    def dof(self, p: int, intercept: bool) -> int:
        if self.kind == "linearity":
            return p + (1 if intercept else 0)
        return 2 * p


@dataclass(frozen=True)
class WaldCurve:
    """Pointwise Wald statistics over a threshold grid and their supremum."""

    gammas: np.ndarray
    values: np.ndarray
    sup_stat: float
    argmax_gamma: float
    estimator: str
    hypothesis: str
    dof: int
    skipped_gammas: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "estimator": self.estimator,
            "sup": float(self.sup_stat),
            "argmax": float(self.argmax_gamma),
            "dof": int(self.dof),
            "grid": self.gammas.tolist(),
            "curve": self.values.tolist(),
            "skipped": self.skipped_gammas.tolist(),
        }


# -- batched model assembly ---------------------------------------------------


def _common_intercept_gram(mom: ThresholdMoments, blocks: dict):
    """Gram and moment of the common-intercept regime-slopes model."""
    p = mom.p
    g = blocks["WW1"].shape[0]
    n = mom.n
    if mom.intercept:
        m = 1 + 2 * p
        G = np.zeros((g, m, m))
        b = np.zeros((g, m))
        Sx1 = blocks["WW1"][:, 0, 1:]
        Sx2 = blocks["WW2"][:, 0, 1:]
        G[:, 0, 0] = n
        G[:, 0, 1:1 + p] = Sx1
        G[:, 1:1 + p, 0] = Sx1
        G[:, 0, 1 + p:] = Sx2
        G[:, 1 + p:, 0] = Sx2
        G[:, 1:1 + p, 1:1 + p] = blocks["WW1"][:, 1:, 1:]
        G[:, 1 + p:, 1 + p:] = blocks["WW2"][:, 1:, 1:]
        b[:, 0] = mom.Wy_total[0]
        b[:, 1:1 + p] = blocks["Wy1"][:, 1:]
        b[:, 1 + p:] = blocks["Wy2"][:, 1:]
        return G, b
    m = 2 * p
    G = np.zeros((g, m, m))
    b = np.zeros((g, m))
    G[:, :p, :p] = blocks["WW1"]
    G[:, p:, p:] = blocks["WW2"]
    b[:, :p] = blocks["Wy1"]
    b[:, p:] = blocks["Wy2"]
    return G, b


def _two_regime_ssr(blocks: dict) -> np.ndarray:
    ssr1, _ = solve_ssr(blocks["WW1"], blocks["Wy1"], blocks["yy1"])
    ssr2, _ = solve_ssr(blocks["WW2"], blocks["Wy2"], blocks["yy2"])
    return ssr1 + ssr2


def _ols_curve(mom: ThresholdMoments, blocks: dict, kind: str) -> np.ndarray:
    """Wald values at every cut: (SSR_r - SSR_u) * n / SSR_u."""
    n = mom.n
    if kind == "linearity":
        ssr_u = _two_regime_ssr(blocks)
        ssr_r, _ = solve_ssr(mom.WW_total[None], mom.Wy_total[None], np.array([mom.yy_total]))
        ssr_r = ssr_r[0]
    elif kind == "joint":
        G, b = _common_intercept_gram(mom, blocks)
        ssr_u, _ = solve_ssr(G, b, mom.yy_total)
        if mom.intercept:
            sy = mom.Wy_total[0]
            ssr_r = mom.yy_total - sy**2 / n
        else:
            ssr_r = mom.yy_total
    elif kind == "predictability":
        ssr_u = _two_regime_ssr(blocks)
        if mom.intercept:
            sy1 = blocks["Wy1"][:, 0]
            sy2 = blocks["Wy2"][:, 0]
            ssr_r = (blocks["yy1"] - sy1**2 / blocks["n1"]) + (blocks["yy2"] - sy2**2 / blocks["n2"])
        else:
            ssr_r = np.full(ssr_u.shape, mom.yy_total)
    else:  # pragma: no cover
        raise InvalidConfig(kind)
    return np.maximum(ssr_r - ssr_u, 0.0) * n / ssr_u


def _restriction_matrix(kind: str, p: int, intercept: bool) -> np.ndarray:
    k = p + (1 if intercept else 0)
    if kind == "linearity":
        return np.concatenate([np.eye(k), -np.eye(k)], axis=1)
    if kind == "joint":
        m = 1 + 2 * p if intercept else 2 * p
        R = np.zeros((2 * p, m))
        R[:, m - 2 * p:] = np.eye(2 * p)
        return R
    # predictability: slopes of both regimes in the two-regime model
    R = np.zeros((2 * p, 2 * k))
    off = 1 if intercept else 0
    R[:p, off:off + p] = np.eye(p)
    R[p:, k + off:k + off + p] = np.eye(p)
    return R


def _check_stack_cond(mats: np.ndarray, what: str):
    svals = np.linalg.svd(mats, compute_uv=False)
    bad = (svals[..., 0] == 0.0) | (svals[..., -1] < RCOND_TOL * svals[..., 0])
    if np.any(bad):
        raise NearSingularInstrumentGram(f"{what} is numerically singular")


def _ivx_curve(mom: ThresholdMoments, blocks: dict, kind: str, sigma2: np.ndarray,
               fm_explained: float) -> np.ndarray:
    """Instrumented Wald values at every cut.

    The slope-restriction statistics (``joint`` and ``predictability``) are
    computed as score-form quadratics ``c' M^-1 c`` where ``c`` stacks the
    intercept-partialled instrument/regressand moments and ``M`` is the
    demeaning-corrected middle matrix

        ``M = sigma2 * sum z z' - n zbar zbar' * sigma2_fm``

    with ``sigma2_fm = sigma2 - fm_explained`` the error variance net of the
    component explained by the regressor innovations.  Without the reduction
    of the demeaned term to the conditional variance, the statistic
    over-rejects in finite samples under endogeneity because the sample mean
    of the (persistent) instrument interacts with the error mean.  The
    linearity statistic restricts intercepts as well and uses the plain
    sandwich ``sigma2 (Z'X)^-1 (Z'Z) (X'Z)^-1`` on the full two-regime
    design.
    """
    p = mom.p
    g = blocks["WW1"].shape[0]
    if kind == "linearity":
        k = mom.k
        m = 2 * k
        ZX = np.zeros((g, m, m))
        ZZ = np.zeros((g, m, m))
        Zy = np.zeros((g, m))
        ZX[:, :k, :k] = blocks["ZW1"]
        ZX[:, k:, k:] = blocks["ZW2"]
        ZZ[:, :k, :k] = blocks["ZZ1"]
        ZZ[:, k:, k:] = blocks["ZZ2"]
        Zy[:, :k] = blocks["Zy1"]
        Zy[:, k:] = blocks["Zy2"]
        _check_stack_cond(ZX, "instrument/regressor cross-moment matrix")
        theta = np.linalg.solve(ZX, Zy[..., None])[..., 0]
        K = np.linalg.inv(ZX)
        V = sigma2[:, None, None] * K @ ZZ @ np.swapaxes(K, -1, -2)
        R = _restriction_matrix(kind, p, mom.intercept)
        Rt = theta @ R.T
        RVR = R @ V @ R.T
        try:
            sol = np.linalg.solve(RVR, Rt[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NearSingularInstrumentGram(
                "restricted sandwich covariance is singular") from exc
        return np.maximum(np.einsum("gr,gr->g", Rt, sol), 0.0)

    fm_sigma2 = np.clip(sigma2 - fm_explained, 1e-12, None)
    if kind == "predictability":
        # regimes are disjoint, so the statistic adds independent
        # regime-wise quadratic forms
        total = np.zeros(g)
        for i in ("1", "2"):
            A, cvec, M = _regime_slope_moments(blocks, i, p, mom.intercept, sigma2, fm_sigma2)
            _check_stack_cond(A, "instrument/regressor cross-moment matrix")
            sol = np.linalg.solve(M, cvec[..., None])[..., 0]
            total += np.einsum("gp,gp->g", cvec, sol)
        return np.maximum(total, 0.0)

    # joint: common intercept, slopes of both regimes restricted
    n = mom.n
    A = np.zeros((g, 2 * p, 2 * p))
    cvec = np.zeros((g, 2 * p))
    Mz = np.zeros((g, 2 * p, 2 * p))
    zbar = np.zeros((g, 2 * p))
    for j, i in enumerate(("1", "2")):
        sl = slice(j * p, (j + 1) * p)
        if mom.intercept:
            zx = blocks[f"ZW{i}"][:, 1:, 1:]
            zz = blocks[f"ZZ{i}"][:, 1:, 1:]
            zy = blocks[f"Zy{i}"][:, 1:]
            zbar[:, sl] = blocks[f"ZZ{i}"][:, 1:, 0]
        else:
            zx = blocks[f"ZW{i}"]
            zz = blocks[f"ZZ{i}"]
            zy = blocks[f"Zy{i}"]
        A[:, sl, sl] = zx
        cvec[:, sl] = zy
        Mz[:, sl, sl] = zz
    if mom.intercept:
        xbar = np.concatenate([blocks["ZW1"][:, 0, 1:], blocks["ZW2"][:, 0, 1:]], axis=1)
        sy = mom.Wy_total[0]
        A = A - zbar[:, :, None] * xbar[:, None, :] / n
        cvec = cvec - zbar * (sy / n)
        M = sigma2[:, None, None] * Mz - \
            fm_sigma2[:, None, None] * (zbar[:, :, None] * zbar[:, None, :] / n)
    else:
        M = sigma2[:, None, None] * Mz
    _check_stack_cond(A, "instrument/regressor cross-moment matrix")
    sol = np.linalg.solve(M, cvec[..., None])[..., 0]
    return np.maximum(np.einsum("gp,gp->g", cvec, sol), 0.0)


def _regime_slope_moments(blocks, i, p, intercept, sigma2, fm_sigma2):
    """Intercept-partialled slope moments of one regime: (A, c, M)."""
    if intercept:
        ni = blocks[f"n{i}"]
        zx = blocks[f"ZW{i}"][:, 1:, 1:]
        zz = blocks[f"ZZ{i}"][:, 1:, 1:]
        zy = blocks[f"Zy{i}"][:, 1:]
        Sz = blocks[f"ZZ{i}"][:, 1:, 0]
        Sx = blocks[f"ZW{i}"][:, 0, 1:]
        Sy = blocks[f"Wy{i}"][:, 0]
        A = zx - Sz[:, :, None] * Sx[:, None, :] / ni[:, None, None]
        cvec = zy - Sz * (Sy / ni)[:, None]
        M = sigma2[:, None, None] * zz - \
            fm_sigma2[:, None, None] * (Sz[:, :, None] * Sz[:, None, :] / ni[:, None, None])
    else:
        A = blocks[f"ZW{i}"]
        cvec = blocks[f"Zy{i}"]
        M = sigma2[:, None, None] * blocks[f"ZZ{i}"]
    return A, cvec, M


def _common_intercept_gram_iv(mom: ThresholdMoments, blocks: dict):
    p = mom.p
    g = blocks["ZW1"].shape[0]
    n = mom.n
    if mom.intercept:
        m = 1 + 2 * p
        ZX = np.zeros((g, m, m))
        Zy = np.zeros((g, m))
        ZX[:, 0, 0] = n
        ZX[:, 0, 1:1 + p] = blocks["ZW1"][:, 0, 1:]   # ones'x, regime 1
        ZX[:, 0, 1 + p:] = blocks["ZW2"][:, 0, 1:]
        ZX[:, 1:1 + p, 0] = blocks["ZW1"][:, 1:, 0]   # z'ones, regime 1
        ZX[:, 1 + p:, 0] = blocks["ZW2"][:, 1:, 0]
        ZX[:, 1:1 + p, 1:1 + p] = blocks["ZW1"][:, 1:, 1:]
        ZX[:, 1 + p:, 1 + p:] = blocks["ZW2"][:, 1:, 1:]
        Zy[:, 0] = mom.Wy_total[0]
        Zy[:, 1:1 + p] = blocks["Zy1"][:, 1:]
        Zy[:, 1 + p:] = blocks["Zy2"][:, 1:]
        return ZX, Zy
    m = 2 * p
    ZX = np.zeros((g, m, m))
    Zy = np.zeros((g, m))
    ZX[:, :p, :p] = blocks["ZW1"]
    ZX[:, p:, p:] = blocks["ZW2"]
    Zy[:, :p] = blocks["Zy1"]
    Zy[:, p:] = blocks["Zy2"]
    return ZX, Zy


def _common_intercept_zz(mom: ThresholdMoments, blocks: dict):
    p = mom.p
    g = blocks["ZZ1"].shape[0]
    n = mom.n
    if mom.intercept:
        m = 1 + 2 * p
        ZZ = np.zeros((g, m, m))
        Sz1 = blocks["ZZ1"][:, 0, 1:]
        Sz2 = blocks["ZZ2"][:, 0, 1:]
        ZZ[:, 0, 0] = n
        ZZ[:, 0, 1:1 + p] = Sz1
        ZZ[:, 1:1 + p, 0] = Sz1
        ZZ[:, 0, 1 + p:] = Sz2
        ZZ[:, 1 + p:, 0] = Sz2
        ZZ[:, 1:1 + p, 1:1 + p] = blocks["ZZ1"][:, 1:, 1:]
        ZZ[:, 1 + p:, 1 + p:] = blocks["ZZ2"][:, 1:, 1:]
        return ZZ
    m = 2 * p
    ZZ = np.zeros((g, m, m))
    ZZ[:, :p, :p] = blocks["ZZ1"]
    ZZ[:, p:, p:] = blocks["ZZ2"]
    return ZZ


def _ols_sigma2(mom: ThresholdMoments, blocks: dict, kind: str) -> np.ndarray:
    """Residual variance of the hypothesis's unrestricted model, SSR_u / n."""
    if kind == "joint":
        G, b = _common_intercept_gram(mom, blocks)
        ssr_u, _ = solve_ssr(G, b, mom.yy_total)
    else:
        ssr_u = _two_regime_ssr(blocks)
    return ssr_u / mom.n


def _fm_explained_variance(sample: Sample) -> float:
    """Error-variance share explained by the regressor innovations.

    Uses threshold-free pooled residuals for the error and per-component
    first-order autoregressive residuals for the regressor innovations, so
    the estimate does not vary over the threshold grid.
    """
    y, x = sample.y, sample.x_lag
    n = sample.n
    W = np.concatenate([np.ones((n, 1)), x], axis=1) if sample.has_intercept else x
    coef, *_ = np.linalg.lstsq(W, y, rcond=None)
    u = y - W @ coef
    rho = np.sum(x[:-1] * x[1:], axis=0) / np.maximum(np.sum(x[:-1] ** 2, axis=0), 1e-300)
    v = x[1:] - rho[None, :] * x[:-1]
    # row i of the sample arrays is time i+1, for residuals and innovations
    # alike, so the two series pair at equal indices
    uu = u[:-1]
    m = uu.shape[0]
    cross = v.T @ uu / m
    vv = v.T @ v / m
    try:
        explained = float(cross @ np.linalg.solve(vv, cross))
    except np.linalg.LinAlgError:
        return 0.0
    return max(explained, 0.0)


def _evaluate(sample: Sample, gammas: np.ndarray, kind: str, estimator: str,
              cfg: IvxConfig | None, corrected: bool) -> np.ndarray:
    z = None
    if estimator == "ivx":
        z = instrument_series(sample, cfg or IvxConfig(), corrected=corrected)
    mom = ThresholdMoments(sample.y, sample.x_lag, sample.q_lag,
                           intercept=sample.has_intercept, z=z)
    counts = mom.counts(gammas)
    if np.any(counts < sample.p + 1) or np.any(mom.n - counts < sample.p + 1):
        raise EmptyRegime("a requested threshold leaves a regime with fewer than p+1 rows")
    blocks = mom.regime_blocks(counts, with_iv=estimator == "ivx")
    if estimator == "ols":
        return _ols_curve(mom, blocks, kind)
    sigma2 = _ols_sigma2(mom, blocks, kind)
    fm_explained = _fm_explained_variance(sample) if kind != "linearity" else 0.0
    return _ivx_curve(mom, blocks, kind, sigma2, fm_explained)


# -- public statistics --------------------------------------------------------


def wald_ols(sample: Sample, gamma: float, hyp: Hypothesis) -> float:
    """Least-squares Wald statistic at a fixed threshold."""
    return float(_evaluate(sample, np.array([float(gamma)]), hyp.kind, "ols", None, False)[0])


def wald_ivx(sample: Sample, gamma: float, hyp: Hypothesis,
             cfg: IvxConfig | None = None, corrected: bool = False) -> float:
    """Instrumented Wald statistic at a fixed threshold."""
    return float(_evaluate(sample, np.array([float(gamma)]), hyp.kind, "ivx", cfg, corrected)[0])


def predictability_wald(sample: Sample, gamma: float, estimator: str = "ols",
                        cfg: IvxConfig | None = None, corrected: bool = False) -> float:
    """Wald statistic for zero slopes in both regimes, intercepts free.

    This is the test applied at an estimated threshold; it has ``2p``
    restrictions and is insensitive to whether the intercepts differ across
    regimes.
    """
    _check_estimator(estimator)
    return float(_evaluate(sample, np.array([float(gamma)]), "predictability",
                           estimator, cfg, corrected)[0])


def sup_wald(sample: Sample, grid: ThresholdGrid | None = None,
             hyp: Hypothesis = Hypothesis("linearity"), estimator: str = "ols",
             cfg: IvxConfig | None = None, corrected: bool = False) -> WaldCurve:
    """Supremum of the pointwise Wald statistic over a threshold grid.

    Grid points that would leave a regime with fewer than p+1 observations
    are excluded and reported in ``skipped_gammas``; ties at the supremum
    resolve to the smallest threshold.
    """
    _check_estimator(estimator)
    if grid is None:
        grid = build_threshold_grid(sample)
    points = grid.points
    n1 = np.searchsorted(np.sort(sample.q_lag), points, side="right")
    ok = (n1 >= sample.p + 1) & (sample.n - n1 >= sample.p + 1)
    skipped = points[~ok]
    points = points[ok]
    if points.size == 0:
        raise EmptyRegime("every grid point leaves an empty regime")
    values = _evaluate(sample, points, hyp.kind, estimator, cfg, corrected)
    j = int(np.argmax(values))
    return WaldCurve(
        gammas=points,
        values=values,
        sup_stat=float(values[j]),
        argmax_gamma=float(points[j]),
        estimator=estimator,
        hypothesis=hyp.kind,
        dof=hyp.dof(sample.p, sample.has_intercept),
        skipped_gammas=skipped,
    )


def wald_at_estimated_threshold(sample: Sample, grid: ThresholdGrid | None = None,
                                estimator: str = "ols", cfg: IvxConfig | None = None,
                                corrected: bool = False) -> tuple[float, float]:
    """Predictability Wald evaluated at the SSR-estimated threshold.

    The threshold is located by the least-squares profile argmin regardless
    of the estimator used for the test.  Returns ``(statistic, gamma_hat)``;
    the statistic has ``2p`` restrictions.
    """
    _check_estimator(estimator)
    if grid is None:
        grid = build_threshold_grid(sample)
    curve = ssr_profile(sample, grid)
    gamma_hat = float(grid.points[int(np.argmin(curve))])
    stat = predictability_wald(sample, gamma_hat, estimator=estimator, cfg=cfg,
                               corrected=corrected)
    return stat, gamma_hat


def _check_estimator(estimator: str):
    if estimator not in ("ols", "ivx"):
        raise InvalidConfig("estimator must be 'ols' or 'ivx'")
