"""Nonlinear least squares for the persistence pair of a scalar regressor path.

Fits ``(c, phi)`` in the recursion ``x_t = exp(c/n + phi' u_t / sqrt(n)) x_{t-1} + e_t``
by minimizing the sum of squared one-step residuals.  The exogenous shock
series ``u_t`` is treated as observed (simulated paths store it); estimation
with a latent shock series is out of scope.
"""

from dataclasses import dataclass

import numpy as np

from .dgp import RegressorPath
from .errors import DimensionMismatch, InvalidConfig

DEFAULT_C_BOUNDS = (-20.0, 20.0)
DEFAULT_PHI_BOUNDS = (-2.0, 2.0)


@dataclass(frozen=True)
class PersistenceFit:
    """NLLS estimate of the persistence pair."""

    c_hat: float
    phi_hat: np.ndarray
    objective: float
    converged: bool
    iterations: int
    grad_norm: float

    def to_dict(self) -> dict:
        return {
            "c_hat": float(self.c_hat),
            "phi_hat": self.phi_hat.tolist(),
            "objective": float(self.objective),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "grad_norm": float(self.grad_norm),
        }


def _series(path) -> np.ndarray:
    if isinstance(path, RegressorPath):
        if path.p != 1:
            raise DimensionMismatch("persistence fitting expects a scalar path")
        return path.x[:, 0]
    x = np.asarray(path, dtype=float)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim != 1:
        raise DimensionMismatch("path must be a scalar series")
    return x


def _exog(exog, n: int) -> np.ndarray:
    u = np.asarray(exog, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] < n:
        raise DimensionMismatch(f"exogenous series has {u.shape[0]} rows, need {n}")
    return u[:n]


def nlls_objective(path, exog, c: float, phi) -> float:
    """Sum of squared one-step residuals at ``(c, phi)``.

    Parameters
    ----------
    path : RegressorPath or (n+1,) array
        Scalar regressor series ``x_0 .. x_n``.
    exog : (n, d) array
        Observed coefficient shocks aligned so that row t-1 drives the step
        from ``x_{t-1}`` to ``x_t``.
    c, phi : parameter values.
    """
    x = _series(path)
    n = x.shape[0] - 1
    if n < 2:
        raise DimensionMismatch("need a path of length >= 2")
    u = _exog(exog, n)
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if phi.shape[0] != u.shape[1]:
        raise DimensionMismatch("phi length must match the exogenous series dimension")
    rho = np.exp(c / n + (u @ phi) / np.sqrt(n))
    resid = x[1:] - rho * x[:-1]
    return float(resid @ resid)


def _objective_parts(x, u, n, theta):
    """Residuals and Jacobian of the residual vector at theta = (c, phi)."""
    c, phi = theta[0], theta[1:]
    rho = np.exp(c / n + (u @ phi) / np.sqrt(n))
    pred = rho * x[:-1]
    resid = x[1:] - pred
    # d resid / d c = -pred / n ; d resid / d phi_j = -pred * u_j / sqrt(n)
    jac = np.empty((n, 1 + phi.shape[0]))
    jac[:, 0] = -pred / n
    jac[:, 1:] = -pred[:, None] * u / np.sqrt(n)
    return resid, jac


def _grid_refine(x, u, n, bounds, points=41):
    """Coarse box grid scan; returns the best lattice point."""
    axes = [np.linspace(lo, hi, points) for lo, hi in bounds]
    best_val, best_theta = np.inf, None
    # evaluate on the full lattice one phi-axis combination at a time
    mesh = np.meshgrid(*axes[1:], indexing="ij") if len(axes) > 1 else []
    phi_grid = (np.stack([m.ravel() for m in mesh], axis=1)
                if mesh else np.zeros((1, 0)))
    for phi in phi_grid:
        shock = np.exp((u @ phi) / np.sqrt(n)) if phi.size else np.ones(n)
        for c in axes[0]:
            rho = np.exp(c / n) * shock
            resid = x[1:] - rho * x[:-1]
            val = resid @ resid
            if val < best_val:
                best_val = val
                best_theta = np.concatenate([[c], phi])
    return best_theta, float(best_val)


def fit_persistence(
    path,
    exog,
    init=(0.0, None),
    bounds=None,
    max_iter: int = 100,
    gtol: float = 1e-8,
) -> PersistenceFit:
    """Fit ``(c, phi)`` by damped Gauss-Newton with an analytic Jacobian.

    Steps solve ``(J'J + lam I) dx = -J'r`` with the damping ``lam`` shrunk
    after accepted steps and grown after rejected ones; iterates are clipped
    into the bounding box.  If Gauss-Newton stalls before reaching ``gtol``,
    a coarse grid scan over the box provides a restart point.  The
    ``converged`` flag reports whether the gradient tolerance was actually
    met; on failure the best point found is returned with
    ``converged=False``.

    Parameters
    ----------
    path, exog : as in :func:`nlls_objective`.
    init : (c0, phi0)
        Starting point; ``phi0 = None`` starts at zero.
    bounds : list of (lo, hi), optional
        Box for ``(c, phi_1, .., phi_d)``.  Defaults to c in [-20, 20] and
        each phi in [-2, 2].
    """
    x = _series(path)
    n = x.shape[0] - 1
    u = _exog(exog, n)
    d = u.shape[1]
    c0, phi0 = init
    phi0 = np.zeros(d) if phi0 is None else np.atleast_1d(np.asarray(phi0, dtype=float))
    if phi0.shape[0] != d:
        raise DimensionMismatch("init phi length must match the exogenous dimension")
    if bounds is None:
        bounds = [DEFAULT_C_BOUNDS] + [DEFAULT_PHI_BOUNDS] * d
    bounds = [tuple(map(float, b)) for b in bounds]
    if len(bounds) != 1 + d:
        raise InvalidConfig("bounds must cover (c, phi_1..phi_d)")
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    theta = np.clip(np.concatenate([[float(c0)], phi0]), lo, hi)
    if np.any(theta != np.concatenate([[float(c0)], phi0])):
        raise InvalidConfig("init must lie inside the bounds")

    def run_gn(theta):
        resid, jac = _objective_parts(x, u, n, theta)
        obj = float(resid @ resid)
        lam = 1e-8
        iters = 0
        grad = 2.0 * jac.T @ resid
        while iters < max_iter:
            if np.linalg.norm(grad) <= gtol * max(1.0, obj):
                return theta, obj, iters, np.linalg.norm(grad), True
            JtJ = jac.T @ jac
            stalled = True
            for _ in range(60):
                try:
                    step = np.linalg.solve(JtJ + lam * np.eye(JtJ.shape[0]), -0.5 * grad)
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                cand = np.clip(theta + step, lo, hi)
                resid_c, jac_c = _objective_parts(x, u, n, cand)
                obj_c = float(resid_c @ resid_c)
                if obj_c <= obj:
                    improved = obj - obj_c > 1e-14 * max(1.0, obj)
                    theta, obj, resid, jac = cand, obj_c, resid_c, jac_c
                    grad = 2.0 * jac.T @ resid
                    lam = max(lam / 10.0, 1e-12)
                    stalled = not improved
                    break
                lam *= 10.0
            iters += 1
            if stalled:
                break
        return theta, obj, iters, float(np.linalg.norm(grad)), \
            bool(np.linalg.norm(grad) <= gtol * max(1.0, obj))

    theta1, obj1, it1, g1, ok1 = run_gn(theta)
    if ok1:
        return PersistenceFit(theta1[0], theta1[1:], obj1, True, it1, g1)

    # fall back to a coarse grid restart
    theta_g, obj_g = _grid_refine(x, u, n, bounds)
    start = theta_g if obj_g < obj1 else theta1
    theta2, obj2, it2, g2, ok2 = run_gn(np.asarray(start, dtype=float))
    if obj2 <= obj1:
        return PersistenceFit(theta2[0], theta2[1:], obj2, ok2, it1 + it2, g2)
    return PersistenceFit(theta1[0], theta1[1:], obj1, False, it1 + it2, g1)
