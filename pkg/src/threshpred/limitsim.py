"""Simulation of the limiting laws of the threshold predictability statistics.

Four functionals are simulated:

* the scaled-regressor limit process (an Ornstein-Uhlenbeck-type diffusion
  whose drift is perturbed by an independent Brownian motion),
* the sup functional of the linearity test under least squares,
* the pivotal sup functional of the joint test under instrumented
  estimation (chi-square plus a normalized Brownian-bridge supremum),
* the two-sided Brownian-motion argmax law of the threshold-location
  estimator, scaled by its data-dependent factor.

All stochastic integrals are discretized with left-point (Ito) sums on a
uniform mesh over [0, 1].  Two-parameter Brownian sheets are simulated via
independent Gaussian increments over mesh rectangles, which reproduces the
exact finite-dimensional sheet distributions on the grid.  Error-variance
scale cancels from every studentized functional, so draws are generated at
unit error variance.

Draws are generated in fixed-size chunks with per-chunk derived streams, so
tables are reproducible under any execution order or parallel schedule.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgmaxAtBoundary, InvalidConfig, SingularLimitGram
from .innovations import CovarianceSpec
from .rng import derive_rng

_CHUNK = 256
_RCOND = 1e-12

FUNCTIONALS = (
    "sup-wald-ols-linearity",
    "sup-wald-ols-joint",
    "sup-wald-ivx-joint",
    "threshold-argmax",
)

FUNCTIONAL_ALIASES = {
    "ols-h1": "sup-wald-ols-linearity",
    "ols-h2": "sup-wald-ols-joint",
    "ivx-h2": "sup-wald-ivx-joint",
    "threshold-argmax": "threshold-argmax",
}


@dataclass(frozen=True)
class MeshSpec:
    """Discretization and replication plan for the limit simulations."""

    steps: int = 2000
    reps: int = 10_000
    seed: int = 0
    lambda_points: int = 71

    def __post_init__(self):
        if self.steps < 100:
            raise InvalidConfig("steps must be at least 100")
        if self.reps < 100:
            raise InvalidConfig("reps must be at least 100")
        if self.lambda_points < 1:
            raise InvalidConfig("lambda_points must be at least 1")


@dataclass(frozen=True)
class CriticalValueTable:
    """Simulated quantiles of a named limit functional, with provenance."""

    functional: str
    params: dict
    levels: tuple
    quantiles: np.ndarray
    reps: int
    steps: int
    seed: int
    version: str = ""

    def __post_init__(self):
        object.__setattr__(self, "quantiles", np.asarray(self.quantiles, dtype=float))
        if np.any(np.diff(self.quantiles) < 0):
            raise InvalidConfig("quantiles must be non-decreasing in level")

    def quantile(self, level: float) -> float:
        idx = list(self.levels).index(level)
        return float(self.quantiles[idx])

    def to_json_dict(self) -> dict:
        return {
            "schema": "threshpred/critical-values/v1",
            "functional": self.functional,
            "params": self.params,
            "levels": list(self.levels),
            "quantiles": self.quantiles.tolist(),
            "reps": self.reps,
            "steps": self.steps,
            "seed": self.seed,
            "version": self.version,
        }

    def csv_text(self) -> str:
        lines = [
            f"# functional: {self.functional}",
            f"# params: {_stable_params(self.params)}",
            f"# steps: {self.steps}",
            f"# reps: {self.reps}",
            f"# seed: {self.seed}",
            f"# version: {self.version}",
            "level,quantile",
        ]
        for lev, q in zip(self.levels, self.quantiles):
            lines.append(f"{lev!r},{q!r}")
        return "\n".join(lines) + "\n"


def _stable_params(params: dict) -> str:
    import json

    return json.dumps(params, sort_keys=True)


# -- limit regressor process --------------------------------------------------


def _xphi_chol(cov: CovarianceSpec, p: int, d: int) -> np.ndarray:
    sig = np.zeros((p + d, p + d))
    sig[:p, :p] = cov.sigma_xx
    sig[p:, p:] = cov.sigma_phiphi
    sig[:p, p:] = cov.cross_xphi
    sig[p:, :p] = cov.cross_xphi.T
    return np.linalg.cholesky(sig)


def _g_from_increments(c, phi, dBx, wincr):
    """Limit-process paths from given Brownian increments.

    ``dBx`` are the regressor increments (m, steps, p) and ``wincr`` the
    projected coefficient-shock increments (m, steps).  Left-point Ito
    discretization throughout; with ``c = 0`` and zero shock increments the
    path is exactly the cumulative sum of ``dBx``.
    """
    m, steps, p = dBx.shape
    B = np.zeros((m, steps + 1))
    np.cumsum(wincr, axis=1, out=B[:, 1:])
    s = np.linspace(0.0, 1.0, steps + 1)
    expo = s[None, :, None] * c[None, None, :] + B[:, :, None]
    damp = np.exp(-expo[:, :-1, :])
    integ = np.cumsum(damp * dBx, axis=1)
    G = np.zeros((m, steps + 1, p))
    G[:, 1:, :] = np.exp(expo[:, 1:, :]) * integ
    return G


def _sim_g_chunk(c, phi, cov, steps, m, rng):
    """Simulate m limit-process paths; returns (G, dBx)."""
    p, d = c.shape[0], phi.shape[0]
    dt = 1.0 / steps
    chol = _xphi_chol(cov, p, d)
    incr = rng.standard_normal((m, steps, p + d)) @ chol.T * np.sqrt(dt)
    dBx = incr[..., :p]
    wincr = incr[..., p:] @ phi
    return _g_from_increments(c, phi, dBx, wincr), dBx


def simulate_ou_env_path(c, phi, cov: CovarianceSpec, mesh: MeshSpec,
                         seed: int | None = None, reps: int | None = None) -> np.ndarray:
    """Simulate paths of the scaled-regressor limit process.

    The process solves
    ``G(r) = exp(r c + phi'B_phi(r)) * int_0^r exp(-s c - phi'B_phi(s)) dB_x(s)``
    componentwise, driven by Brownian motions with the covariance of the
    regressor innovations and coefficient shocks.  With ``c = 0`` and
    ``phi = 0`` the path is exactly the cumulative sum of the ``dB_x``
    increments.

    Returns an array of shape ``(reps, steps+1, p)``.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    seed = mesh.seed if seed is None else seed
    reps = mesh.reps if reps is None else reps
    out = np.empty((reps, mesh.steps + 1, c.shape[0]))
    done = 0
    chunk_idx = 0
    while done < reps:
        m = min(_CHUNK, reps - done)
        rng = derive_rng(seed, "ou-env-path", chunk_idx)
        G, _ = _sim_g_chunk(c, phi, cov, mesh.steps, m, rng)
        out[done:done + m] = G
        done += m
        chunk_idx += 1
    return out


def _moment_matrix(G: np.ndarray, steps: int) -> np.ndarray:
    """Left-point quadrature of the process outer-product moment."""
    Gl = G[:, :-1, :]
    return np.einsum("msp,msq->mpq", Gl, Gl) / steps


def _rcond_ok(M: np.ndarray) -> np.ndarray:
    eigs = np.linalg.eigvalsh(M)
    return (eigs[..., -1] > 0) & (eigs[..., 0] >= _RCOND * eigs[..., -1])


# -- sup functionals ----------------------------------------------------------


def _lambda_grid(trimming, points: int):
    pi1, pi2 = float(trimming[0]), float(trimming[1])
    if not 0.0 < pi1 <= pi2 < 1.0:
        raise InvalidConfig("trimming must satisfy 0 < pi1 <= pi2 < 1")
    lam = np.linspace(pi1, pi2, points)
    edges = np.concatenate([[0.0], lam, [1.0]])
    widths = np.diff(edges)
    return lam, widths


def _sheet_numerator(Gl, lam, widths, steps, m, rng):
    """Bridge numerators N(lambda_k) and endpoint S(1) of the sheet integrals.

    Simulates independent N(0, ds*dlam) rectangle increments of a standard
    two-parameter Brownian motion and accumulates S(lambda) = sum_i
    G(s_{i-1}) * [W(s_i, lambda) - W(s_{i-1}, lambda)] by lambda segment;
    returns ``N_k = S(lambda_k) - lambda_k S(1)`` and ``S(1)``.
    """
    p = Gl.shape[2]
    K = lam.shape[0]
    U = np.empty((m, K + 1, p))
    sqdt = 1.0 / np.sqrt(steps)
    for k, w in enumerate(widths):
        rect = rng.standard_normal((m, steps)) * (np.sqrt(w) * sqdt)
        U[:, k, :] = np.einsum("ms,msp->mp", rect, Gl)
    S = np.cumsum(U, axis=1)
    S1 = S[:, -1, :]
    N = S[:, :K, :] - lam[None, :, None] * S1[:, None, :]
    return N, S1


def _bridge_quadform(N, M, lam):
    sol = np.linalg.solve(M[:, None, :, :], N[..., None])[..., 0]
    vals = np.einsum("mkp,mkp->mk", N, sol) / (lam * (1.0 - lam))[None, :]
    return vals


def draw_linearity_sup_limit(c, phi, cov: CovarianceSpec, trimming, p: int,
                             mesh: MeshSpec, seed: int | None = None) -> np.ndarray:
    """Draws of the sup functional of the linearity-test limit law.

    For each draw a fresh limit-process path G and an independent Brownian
    sheet are simulated; the draw is the supremum over the lambda grid of

    ``{int G dW(s,l) - l int G dW(s)}' {l(1-l) int GG'}^-1 {...}``.

    The correlation between the sheet and the increments driving G cancels
    from this functional identically (the numerator depends on the sheet
    only through its bridge component in the lambda direction), so the sheet
    is simulated independently of G.

    Draws whose moment matrix is numerically singular are re-simulated once;
    a second failure raises :class:`SingularLimitGram`.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if c.shape[0] != p:
        raise InvalidConfig("length of c must equal p")
    seed = mesh.seed if seed is None else seed
    lam, widths = _lambda_grid(trimming, mesh.lambda_points)
    out = np.empty(mesh.reps)
    done = 0
    chunk_idx = 0
    while done < mesh.reps:
        m = min(_CHUNK, mesh.reps - done)
        rng = derive_rng(seed, "sup-linearity", chunk_idx)
        vals = _linearity_chunk(c, phi, cov, lam, widths, mesh.steps, m, rng,
                                derive_rng(seed, "sup-linearity-resample", chunk_idx))
        out[done:done + m] = vals
        done += m
        chunk_idx += 1
    return out


def _linearity_chunk(c, phi, cov, lam, widths, steps, m, rng, resample_rng):
    G, _ = _sim_g_chunk(c, phi, cov, steps, m, rng)
    M = _moment_matrix(G, steps)
    ok = _rcond_ok(M)
    if not np.all(ok):
        bad = np.flatnonzero(~ok)
        G2, _ = _sim_g_chunk(c, phi, cov, steps, bad.size, resample_rng)
        G[bad] = G2
        M = _moment_matrix(G, steps)
        if not np.all(_rcond_ok(M)):
            raise SingularLimitGram("limit moment matrix singular after one resample")
    N, _ = _sheet_numerator(G[:, :-1, :], lam, widths, steps, m, rng)
    vals = _bridge_quadform(N, M, lam)
    return vals.max(axis=1)


def draw_joint_sup_limit_ivx(trimming, p: int, mesh: MeshSpec,
                             seed: int | None = None) -> np.ndarray:
    """Draws of the pivotal joint-test limit under instrumented estimation.

    ``W(1)^2 + sup_l BB(l)'BB(l) / (l(1-l))`` with a p-dimensional standard
    Brownian bridge and an independent standard normal; no nuisance
    parameters enter.
    """
    seed = mesh.seed if seed is None else seed
    lam, widths = _lambda_grid(trimming, mesh.lambda_points)
    K = lam.shape[0]
    out = np.empty(mesh.reps)
    done = 0
    chunk_idx = 0
    while done < mesh.reps:
        m = min(_CHUNK, mesh.reps - done)
        rng = derive_rng(seed, "sup-ivx-joint", chunk_idx)
        incr = rng.standard_normal((m, K + 1, p)) * np.sqrt(widths)[None, :, None]
        B = np.cumsum(incr, axis=1)
        B1 = B[:, -1, :]
        BB = B[:, :K, :] - lam[None, :, None] * B1[:, None, :]
        vals = np.einsum("mkp,mkp->mk", BB, BB) / (lam * (1.0 - lam))[None, :]
        w1 = rng.standard_normal(m)
        out[done:done + m] = w1**2 + vals.max(axis=1)
        done += m
        chunk_idx += 1
    return out


def draw_joint_sup_limit_ols(c, phi, cov: CovarianceSpec, trimming, p: int,
                             mesh: MeshSpec, seed: int | None = None) -> np.ndarray:
    """Draws of the joint-test limit under least squares.

    The law adds a predictability component
    ``[int G dW]' [int GG']^-1 [int G dW]`` to the linearity sup functional.
    Under correlation between the regression error and the regressor
    increments (endogeneity) the predictability component is non-central
    conditionally on G, which is what breaks the pivotality of the
    least-squares test; the bridge component is unaffected.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if c.shape[0] != p:
        raise InvalidConfig("length of c must equal p")
    seed = mesh.seed if seed is None else seed
    lam, widths = _lambda_grid(trimming, mesh.lambda_points)
    sigma_y = float(cov.sigma_y)
    b = np.linalg.solve(cov.sigma_xx, cov.cross_xy)
    sigma_e2 = sigma_y - float(cov.cross_xy @ b)
    if sigma_e2 < 0:
        raise InvalidConfig("covariance implies negative residual variance")
    out = np.empty(mesh.reps)
    done = 0
    chunk_idx = 0
    while done < mesh.reps:
        m = min(_CHUNK, mesh.reps - done)
        rng = derive_rng(seed, "sup-ols-joint", chunk_idx)
        resample_rng = derive_rng(seed, "sup-ols-joint-resample", chunk_idx)
        G, dBx = _sim_g_chunk(c, phi, cov, mesh.steps, m, rng)
        M = _moment_matrix(G, mesh.steps)
        ok = _rcond_ok(M)
        if not np.all(ok):
            bad = np.flatnonzero(~ok)
            G2, dBx2 = _sim_g_chunk(c, phi, cov, mesh.steps, bad.size, resample_rng)
            G[bad] = G2
            dBx[bad] = dBx2
            M = _moment_matrix(G, mesh.steps)
            if not np.all(_rcond_ok(M)):
                raise SingularLimitGram("limit moment matrix singular after one resample")
        Gl = G[:, :-1, :]
        A_b = np.einsum("msp,ms->mp", Gl, dBx @ b)
        L = np.linalg.cholesky(M)
        zeta = rng.standard_normal((m, p))
        S1 = (A_b + np.sqrt(sigma_e2) * np.einsum("mpq,mq->mp", L, zeta)) / np.sqrt(sigma_y)
        t1 = np.einsum("mp,mp->m", S1, np.linalg.solve(M, S1[..., None])[..., 0])
        N, _ = _sheet_numerator(Gl, lam, widths, mesh.steps, m, rng)
        vals = _bridge_quadform(N, M, lam)
        out[done:done + m] = t1 + vals.max(axis=1)
        done += m
        chunk_idx += 1
    return out


# -- threshold-location limit -------------------------------------------------


def _two_sided_argmax(rng, m: int, truncation: float, step: float) -> np.ndarray:
    """Argmax locations of ``W(r) - |r|/2`` over a symmetric truncated mesh.

    The process is zero at the origin and uses two independent Brownian
    motions on the positive and negative half-axes.
    """
    J = int(round(truncation / step))
    r_star = np.zeros(m)
    best = np.zeros(m)
    drift = np.arange(1, J + 1) * step / 2.0
    for sign in (1.0, -1.0):
        W = np.cumsum(rng.standard_normal((m, J)) * np.sqrt(step), axis=1)
        lamb = W - drift[None, :]
        j = np.argmax(lamb, axis=1)
        side_best = lamb[np.arange(m), j]
        better = side_best > best
        best = np.where(better, side_best, best)
        r_star = np.where(better, sign * (j + 1) * step, r_star)
    return r_star


def draw_threshold_location_limit(
    c, phi, cov: CovarianceSpec, delta0, f_gamma0: float, sigma_u: float,
    mesh: MeshSpec, truncation: float = 50.0, seed: int | None = None,
    argmax_step: float = 0.01, return_boundary_fraction: bool = False,
):
    """Draws of the scaled threshold-location limit law.

    Each draw is ``H * argmax L`` where ``L(r) = W(r) - |r|/2`` is a
    two-sided Brownian motion with triangular drift simulated on
    ``[-truncation, truncation]``, and the scale
    ``H = sigma_u^2 / (f(gamma0) delta0' [int GG'] delta0)`` uses a fresh
    limit-process path per draw.

    Raises :class:`ArgmaxAtBoundary` when more than 1% of draws attain the
    argmax at the truncation boundary, which signals that the truncation
    range is too small.  The boundary-hit fraction is returned alongside the
    draws when ``return_boundary_fraction`` is set.
    """
    if truncation < 50.0:
        raise InvalidConfig("truncation range must be at least 50")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    delta0 = np.atleast_1d(np.asarray(delta0, dtype=float))
    seed = mesh.seed if seed is None else seed
    out = np.empty(mesh.reps)
    hits = 0
    done = 0
    chunk_idx = 0
    while done < mesh.reps:
        m = min(_CHUNK, mesh.reps - done)
        rng = derive_rng(seed, "threshold-argmax", chunk_idx)
        G, _ = _sim_g_chunk(c, phi, cov, mesh.steps, m, rng)
        M = _moment_matrix(G, mesh.steps)
        denom = f_gamma0 * np.einsum("p,mpq,q->m", delta0, M, delta0)
        H = sigma_u**2 / denom

        r_star = _two_sided_argmax(rng, m, truncation, argmax_step)
        hits += int(np.sum(np.abs(r_star) >= truncation - argmax_step / 2))
        out[done:done + m] = H * r_star
        done += m
        chunk_idx += 1
    frac = hits / mesh.reps
    if frac > 0.01:
        raise ArgmaxAtBoundary(
            f"argmax hit the truncation boundary in {frac:.1%} of draws; enlarge truncation")
    if return_boundary_fraction:
        return out, frac
    return out


# -- tabulation ---------------------------------------------------------------


def resolve_functional(name: str) -> str:
    key = FUNCTIONAL_ALIASES.get(name, name)
    if key not in FUNCTIONALS:
        raise InvalidConfig(f"unknown functional {name!r}; known: {FUNCTIONALS}")
    return key


def _default_cov(p: int, d: int) -> CovarianceSpec:
    return CovarianceSpec(sigma_y=1.0, sigma_xx=np.eye(p), sigma_phiphi=np.eye(max(d, 1)))


def tabulate_critical_values(functional: str, params: dict, levels, mesh: MeshSpec,
                             version: str = "") -> CriticalValueTable:
    """Simulate a named limit functional and tabulate empirical quantiles.

    ``params`` supplies the functional's nuisance parameters: ``p``,
    ``trimming`` and, for the least-squares functionals, ``c``, ``phi`` and
    optionally ``cov`` (dict or :class:`CovarianceSpec`); the
    threshold-argmax law additionally takes ``delta0``, ``f_gamma0``,
    ``sigma_u`` and ``truncation``.  Unsorted levels are sorted ascending.
    """
    functional = resolve_functional(functional)
    levels = tuple(sorted(float(v) for v in levels))
    if any(not 0.0 < v < 1.0 for v in levels):
        raise InvalidConfig("levels must lie strictly inside (0, 1)")
    p = int(params.get("p", 1))
    trimming = tuple(params.get("trimming", (0.15, 0.85)))
    c = np.atleast_1d(np.asarray(params.get("c", np.zeros(p)), dtype=float))
    phi = np.atleast_1d(np.asarray(params.get("phi", [0.0]), dtype=float))
    cov = params.get("cov")
    if cov is None:
        cov = _default_cov(p, phi.shape[0])
    elif isinstance(cov, dict):
        cov = CovarianceSpec.from_dict(cov)

    if functional == "sup-wald-ols-linearity":
        draws = draw_linearity_sup_limit(c, phi, cov, trimming, p, mesh)
    elif functional == "sup-wald-ols-joint":
        draws = draw_joint_sup_limit_ols(c, phi, cov, trimming, p, mesh)
    elif functional == "sup-wald-ivx-joint":
        draws = draw_joint_sup_limit_ivx(trimming, p, mesh)
    else:
        draws = draw_threshold_location_limit(
            c, phi, cov,
            delta0=params.get("delta0", np.ones(p)),
            f_gamma0=float(params.get("f_gamma0", 1.0)),
            sigma_u=float(params.get("sigma_u", 1.0)),
            mesh=mesh,
            truncation=float(params.get("truncation", 50.0)),
        )
    quantiles = np.quantile(draws, levels)
    record = {
        "p": p,
        "trimming": list(trimming),
        "c": c.tolist(),
        "phi": phi.tolist(),
        "cov": cov.to_dict(),
    }
    for key in ("delta0", "f_gamma0", "sigma_u", "truncation"):
        if key in params:
            val = params[key]
            record[key] = val.tolist() if isinstance(val, np.ndarray) else val
    return CriticalValueTable(
        functional=functional,
        params=record,
        levels=levels,
        quantiles=quantiles,
        reps=mesh.reps,
        steps=mesh.steps,
        seed=mesh.seed,
        version=version,
    )


def quantile_se(draws: np.ndarray, level: float) -> float:
    """Order-statistic standard error of an empirical quantile (density-free)."""
    x = np.sort(np.asarray(draws))
    n = x.shape[0]
    k = level * (n - 1)
    half = np.sqrt(n * level * (1.0 - level))
    lo = int(np.clip(np.floor(k - half), 0, n - 1))
    hi = int(np.clip(np.ceil(k + half), 0, n - 1))
    return float((x[hi] - x[lo]) / 2.0)
