"""Gaussian martingale-difference innovations for the simulation engine.

The model innovation vector stacks the regression error, the regressor
innovations and the exogenous coefficient shocks,
``(u_y, u_x1..u_xp, u_phi1..u_phid)``.  Rows are drawn i.i.d. from a
mean-zero normal with a block covariance assembled from
:class:`CovarianceSpec`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidSampleSize, NotPositiveDefinite
from .rng import derive_rng


@dataclass(frozen=True)
class CovarianceSpec:
    """Block covariance of the innovation vector.

    Parameters
    ----------
    sigma_y : float
        Variance of the regression error.
    sigma_xx : (p, p) array_like
        Covariance of the regressor innovations; symmetric positive definite.
    sigma_phiphi : (d, d) array_like
        Covariance of the exogenous coefficient shocks; symmetric positive
        definite.
    cross_xy : (p,) array_like
        Covariance between regressor innovations and the regression error;
        the endogeneity control.  Zero by default.
    cross_xphi : (p, d) array_like
        Covariance between regressor innovations and coefficient shocks.
        Zero by default.

    With both cross blocks zero the assembled matrix is the block-diagonal
    covariance of the exogenous baseline model.
    """

    sigma_y: float = 1.0
    sigma_xx: np.ndarray = field(default_factory=lambda: np.eye(1))
    sigma_phiphi: np.ndarray = field(default_factory=lambda: np.eye(1))
    cross_xy: np.ndarray | None = None
    cross_xphi: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma_xx", np.atleast_2d(np.asarray(self.sigma_xx, dtype=float)))
        object.__setattr__(self, "sigma_phiphi", np.atleast_2d(np.asarray(self.sigma_phiphi, dtype=float)))
        p, d = self.p, self.d
        cxy = np.zeros(p) if self.cross_xy is None else np.asarray(self.cross_xy, dtype=float).reshape(-1)
        cxphi = np.zeros((p, d)) if self.cross_xphi is None else np.atleast_2d(np.asarray(self.cross_xphi, dtype=float))
        object.__setattr__(self, "cross_xy", cxy)
        object.__setattr__(self, "cross_xphi", cxphi)
        if self.sigma_xx.shape != (p, p):
            raise DimensionMismatch("sigma_xx must be square")
        if self.sigma_phiphi.shape != (d, d):
            raise DimensionMismatch("sigma_phiphi must be square")
        if cxy.shape != (p,):
            raise DimensionMismatch(f"cross_xy must have length p={p}")
        if cxphi.shape != (p, d):
            raise DimensionMismatch(f"cross_xphi must have shape ({p}, {d})")
        if self.sigma_y <= 0:
            raise NotPositiveDefinite("sigma_y must be positive")

    @property
    def p(self) -> int:
        return self.sigma_xx.shape[0]

    @property
    def d(self) -> int:
        return self.sigma_phiphi.shape[0]

    @property
    def dim(self) -> int:
        return 1 + self.p + self.d

    def to_dict(self) -> dict:
        return {
            "sigma_y": float(self.sigma_y),
            "sigma_xx": self.sigma_xx.tolist(),
            "sigma_phiphi": self.sigma_phiphi.tolist(),
            "cross_xy": self.cross_xy.tolist(),
            "cross_xphi": self.cross_xphi.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CovarianceSpec":
        return cls(
            sigma_y=data.get("sigma_y", 1.0),
            sigma_xx=np.asarray(data.get("sigma_xx", [[1.0]])),
            sigma_phiphi=np.asarray(data.get("sigma_phiphi", [[1.0]])),
            cross_xy=None if data.get("cross_xy") is None else np.asarray(data["cross_xy"]),
            cross_xphi=None if data.get("cross_xphi") is None else np.asarray(data["cross_xphi"]),
        )


@dataclass(frozen=True)
class InnovationPanel:
    """An ``n x (1+p+d)`` matrix of innovation draws plus its provenance."""

    n: int
    p: int
    d: int
    draws: np.ndarray
    seed: int

    def __post_init__(self):
        if self.draws.shape != (self.n, 1 + self.p + self.d):
            raise DimensionMismatch("draws shape inconsistent with (n, 1+p+d)")
        self.draws.setflags(write=False)

    @property
    def u_y(self) -> np.ndarray:
        """Regression-error column, length n."""
        return self.draws[:, 0]

    @property
    def u_x(self) -> np.ndarray:
        """Regressor innovation columns, shape (n, p)."""
        return self.draws[:, 1:1 + self.p]

    @property
    def u_phi(self) -> np.ndarray:
        """Coefficient shock columns, shape (n, d)."""
        return self.draws[:, 1 + self.p:]


def assemble_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Assemble and validate the full innovation covariance matrix.

    Returns the symmetric ``(1+p+d) x (1+p+d)`` matrix in the row order
    ``(u_y, u_x, u_phi)``.  Raises :class:`NotPositiveDefinite` when the
    assembled matrix has no Cholesky factorization.
    """
    p, d = spec.p, spec.d
    k = spec.dim
    sigma = np.zeros((k, k))
    sigma[0, 0] = spec.sigma_y
    sigma[1:1 + p, 1:1 + p] = spec.sigma_xx
    sigma[1 + p:, 1 + p:] = spec.sigma_phiphi
    sigma[0, 1:1 + p] = spec.cross_xy
    sigma[1:1 + p, 0] = spec.cross_xy
    sigma[1:1 + p, 1 + p:] = spec.cross_xphi
    sigma[1 + p:, 1:1 + p] = spec.cross_xphi.T
    sigma = 0.5 * (sigma + sigma.T)
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("assembled innovation covariance is not positive definite") from exc
    return sigma


def draw_innovations(spec: CovarianceSpec, n: int, seed: int, *path) -> InnovationPanel:
    """Draw an i.i.d. Gaussian innovation panel.

    Parameters
    ----------
    spec : CovarianceSpec
        Block covariance of the innovation vector.
    n : int
        Number of rows; must be at least 2.
    seed : int
        Reproducibility key.  Equal ``(spec, n, seed)`` calls return
        bit-identical panels.
    *path
        Optional extra derivation path (e.g. replication index) so that
        Monte Carlo replications draw from independent streams.
    """
    if n < 2:
        raise InvalidSampleSize(f"need n >= 2, got {n}")
    sigma = assemble_covariance(spec)
    chol = np.linalg.cholesky(sigma)
    rng = derive_rng(seed, *path)
    z = rng.standard_normal((n, spec.dim))
    draws = z @ chol.T
    return InnovationPanel(n=n, p=spec.p, d=spec.d, draws=draws, seed=seed)
