"""Sorted-threshold cumulative moments.

Shared computational core of the SSR profile and the Wald curves.  Rows are
sorted by the threshold variable once; regime-1 moments at any candidate
threshold are then forward cumulative sums up to the cut index and regime-2
moments are backward cumulative sums from the cut index, so no moment is ever
formed by subtraction (which would lose precision on explosive paths).

Regressor and instrument columns are rescaled to unit root-mean-square before
any Gram matrix is formed; SSR and Wald statistics are invariant to this, and
coefficient estimates are mapped back to the original scale.
"""

import numpy as np

from .errors import EmptyRegime, RankDeficient

RCOND_TOL = 1e-12


def _cum_fwd(a: np.ndarray) -> np.ndarray:
    return np.cumsum(a, axis=0)


def _cum_bwd(a: np.ndarray) -> np.ndarray:
    """out[i] = sum over rows i..n-1; out has one extra all-zero row at n."""
    out = np.zeros((a.shape[0] + 1,) + a.shape[1:], dtype=a.dtype)
    out[:-1] = np.cumsum(a[::-1], axis=0)[::-1]
    return out


class ThresholdMoments:
    """Cumulative regime moments of a sample sorted by its threshold variable.

    Parameters
    ----------
    y, x, q : arrays of shared length n
    intercept : bool
        Whether the base regressor block is ``[1, x]`` or ``[x]``.
    z : (n, p) array, optional
        Instrument columns mirroring ``x``; enables the IV moment blocks.
    """

    def __init__(self, y, x, q, intercept=True, z=None):
        y = np.asarray(y, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        q = np.asarray(q, dtype=float).reshape(-1)
        n, p = x.shape
        order = np.argsort(q, kind="stable")
        self.n, self.p = n, p
        self.intercept = bool(intercept)
        self.q_sorted = q[order]
        ys = y[order]
        xs = x[order]

        self.x_scale = np.sqrt(np.mean(xs**2, axis=0))
        self.x_scale[self.x_scale == 0.0] = 1.0
        xs = xs / self.x_scale

        cols = [np.ones((n, 1)), xs] if self.intercept else [xs]
        W = np.concatenate(cols, axis=1)
        self.k = W.shape[1]

        WW = W[:, :, None] * W[:, None, :]
        Wy = W * ys[:, None]
        yy = ys**2
        self.WW_f, self.WW_b = _cum_fwd(WW), _cum_bwd(WW)
        self.Wy_f, self.Wy_b = _cum_fwd(Wy), _cum_bwd(Wy)
        self.yy_f, self.yy_b = _cum_fwd(yy), _cum_bwd(yy)

        if z is not None:
            z = np.asarray(z, dtype=float)
            if z.ndim == 1:
                z = z[:, None]
            zs = z[order]
            self.z_scale = np.sqrt(np.mean(zs**2, axis=0))
            self.z_scale[self.z_scale == 0.0] = 1.0
            zs = zs / self.z_scale
            Z = np.concatenate([np.ones((n, 1)), zs] if self.intercept else [zs], axis=1)
            ZW = Z[:, :, None] * W[:, None, :]
            ZZ = Z[:, :, None] * Z[:, None, :]
            Zy = Z * ys[:, None]
            self.ZW_f, self.ZW_b = _cum_fwd(ZW), _cum_bwd(ZW)
            self.ZZ_f, self.ZZ_b = _cum_fwd(ZZ), _cum_bwd(ZZ)
            self.Zy_f, self.Zy_b = _cum_fwd(Zy), _cum_bwd(Zy)
        else:
            self.z_scale = None

    # -- cut bookkeeping ------------------------------------------------

    def counts(self, gammas) -> np.ndarray:
        """Number of regime-1 rows (q <= gamma) for each candidate."""
        return np.searchsorted(self.q_sorted, np.asarray(gammas, dtype=float), side="right")

    def regime_blocks(self, counts, with_iv=False):
        """Stacked regime moments at the given regime-1 counts.

        Returns a dict with keys ``WW1, Wy1, yy1, WW2, Wy2, yy2, n1, n2``
        (plus the IV blocks when requested).  Requires every count to leave
        at least one row in each regime.
        """
        counts = np.asarray(counts)
        if np.any(counts < 1) or np.any(counts > self.n - 1):
            raise EmptyRegime("candidate threshold leaves an empty regime")
        i1 = counts - 1
        i2 = counts
        out = {
            "n1": counts,
            "n2": self.n - counts,
            "WW1": self.WW_f[i1], "Wy1": self.Wy_f[i1], "yy1": self.yy_f[i1],
            "WW2": self.WW_b[i2], "Wy2": self.Wy_b[i2], "yy2": self.yy_b[i2],
        }
        if with_iv:
            if self.z_scale is None:
                raise ValueError("moments were built without an instrument")
            out.update(
                ZW1=self.ZW_f[i1], ZZ1=self.ZZ_f[i1], Zy1=self.Zy_f[i1],
                ZW2=self.ZW_b[i2], ZZ2=self.ZZ_b[i2], Zy2=self.Zy_b[i2],
            )
        return out

    # -- pooled (threshold-free) moments ---------------------------------

    @property
    def WW_total(self):
        return self.WW_b[0]

    @property
    def Wy_total(self):
        return self.Wy_b[0]

    @property
    def yy_total(self):
        return float(self.yy_b[0])


def check_rcond(gram: np.ndarray, what: str = "design"):
    """Raise RankDeficient when any stacked Gram has rcond below tolerance."""
    eigs = np.linalg.eigvalsh(gram)
    emax = eigs[..., -1]
    emin = eigs[..., 0]
    bad = (emax <= 0) | (emin < RCOND_TOL * emax)
    if np.any(bad):
        raise RankDeficient(f"{what} Gram matrix is singular beyond rcond {RCOND_TOL:g}")


def solve_ssr(gram, moment, yy):
    """SSR of stacked least-squares problems given Gram/moment/total squares."""
    check_rcond(gram)
    coef = np.linalg.solve(gram, moment[..., None])[..., 0]
    ssr = yy - np.einsum("...k,...k->...", moment, coef)
    return np.maximum(ssr, 0.0), coef
