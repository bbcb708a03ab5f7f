"""Monte Carlo experiment harness for the threshold predictability tests.

Reproduces the canonical simulation protocol: threshold-estimator accuracy,
empirical size and power over a grid of persistence parameters, with
deterministic per-replication random streams so results are byte-identical
under any number of workers.

Replications within a ``(n, c, phi)`` cell share samples across estimators
(paired comparison); a replication that raises a package error is recorded,
not silently dropped, and a cell aborts with a diagnostic when failures
exceed 1% of the replications.
"""

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as spstats

from . import __version__
from .dgp import CovarianceSpec, PersistenceSpec, ThresholdDgpSpec, gen_threshold_sample
from .errors import InvalidConfig, MissingCriticalValues, ThreshpredError
from .estimate import build_threshold_grid, ssr_profile
from .ivx import IvxConfig
from .limitsim import MeshSpec, tabulate_critical_values
from .wald import Hypothesis, predictability_wald, sup_wald

_KINDS = ("accuracy", "size", "power")
_STATISTICS = ("wald-at-threshold", "sup-wald")
_REP_CHUNK = 64

CSV_COLUMNS = (
    "kind", "n", "c", "phi", "estimator", "statistic", "metric", "level",
    "critical_value", "critval_source", "value", "mc_se", "B", "failures", "status",
)


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one Monte Carlo experiment.

    Defaults follow the canonical protocol: persistence grid
    ``c in {1, 2, 5, 10}``, shock loadings ``phi in {0, 0.05, 0.25, 0.5}``,
    sample sizes ``{250, 500}``, 5000 replications for threshold-accuracy
    experiments and 1000 for test size/power.
    """

    kind: str = "size"
    n_list: tuple = (250, 500)
    c_list: tuple = (1.0, 2.0, 5.0, 10.0)
    phi_list: tuple = (0.0, 0.05, 0.25, 0.50)
    B: int | None = None
    nominal_levels: tuple = (0.05,)
    estimators: tuple = ("ols", "ivx")
    statistic: str = "wald-at-threshold"
    hypothesis: str = "joint"
    p: int = 1
    endogeneity: float = 0.0
    delta0: float = 2.0
    tau: float = 0.25
    delta_fixed: float | None = None
    gamma0: float = 0.25
    trimming: tuple = (0.15, 0.85)
    cz: float = 1.0
    gammaz: float = 0.95
    corrected: bool = False
    alpha_shift: float | None = None
    seed: int = 0
    table_reps: int = 20_000
    table_steps: int = 1000
    on_demand_tables: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidConfig(f"kind must be one of {_KINDS}")
        if self.statistic not in _STATISTICS:
            raise InvalidConfig(f"statistic must be one of {_STATISTICS}")
        if not self.n_list or not self.c_list or not self.phi_list:
            raise InvalidConfig("n_list, c_list and phi_list must be non-empty")

    @property
    def replications(self) -> int:
        if self.B is not None:
            return self.B
        return 5000 if self.kind == "accuracy" else 1000

    def to_dict(self) -> dict:
        d = asdict(self)
        d["B"] = self.replications
        return d


@dataclass
class ExperimentResult:
    """Per-cell records of an experiment plus its provenance."""

    spec: dict
    records: list
    provenance: dict = field(default_factory=dict)

    def payload(self) -> dict:
        return {
            "schema": "threshpred/mc-result/v1",
            "provenance": self.provenance,
            "spec": self.spec,
            "records": self.records,
        }


def _ivx_cfg(spec: ExperimentSpec) -> IvxConfig:
    return IvxConfig(c_z=spec.cz, gamma_z=spec.gammaz)


def _cell_dgp(spec: ExperimentSpec, c: float, phi: float):
    """Cell data generating process.

    The estimated-threshold statistic tests only the regime slopes, so its
    size and power cells keep an intercept shift across regimes by default:
    the threshold location stays identified under that statistic's null.
    Sup-Wald experiments test the threshold effect itself, so their null
    cells carry no shift of any kind.  ``alpha_shift`` overrides either
    default.
    """
    p = spec.p
    if spec.alpha_shift is not None:
        shift = spec.alpha_shift
    elif spec.kind in ("size", "power") and spec.statistic == "wald-at-threshold":
        shift = 1.0
    else:
        shift = 0.0
    alpha = (shift, 0.0)
    if spec.kind == "size":
        dgp = ThresholdDgpSpec(alpha=alpha, beta_base=np.zeros(p), gamma0=spec.gamma0)
    elif spec.delta_fixed is not None:
        dgp = ThresholdDgpSpec(alpha=alpha, beta_base=np.zeros(p),
                               delta_fixed=np.full(p, spec.delta_fixed), gamma0=spec.gamma0)
    else:
        dgp = ThresholdDgpSpec(alpha=alpha, beta_base=np.zeros(p),
                               delta0=np.full(p, spec.delta0), tau=spec.tau, gamma0=spec.gamma0)
    pers = PersistenceSpec(c=np.full(p, c), phi=np.array([phi]), form="exact")
    cov = CovarianceSpec(
        sigma_y=1.0, sigma_xx=np.eye(p), sigma_phiphi=np.eye(1),
        cross_xy=np.full(p, spec.endogeneity) if spec.endogeneity else None,
    )
    return dgp, pers, cov


def _replicate(spec: ExperimentSpec, cell_idx: int, cell, rep: int):
    """One replication; returns per-estimator statistics or the gamma error."""
    n, c, phi = cell
    dgp, pers, cov = _cell_dgp(spec, c, phi)
    sample = gen_threshold_sample(dgp, pers, cov, n, spec.seed, cell_idx, rep)
    grid = build_threshold_grid(sample, *spec.trimming)
    if spec.kind == "accuracy":
        curve = ssr_profile(sample, grid)
        gamma_hat = float(grid.points[int(np.argmin(curve))])
        return (gamma_hat - spec.gamma0,)
    cfg = _ivx_cfg(spec)
    if spec.statistic == "wald-at-threshold":
        curve = ssr_profile(sample, grid)
        gamma_hat = float(grid.points[int(np.argmin(curve))])
        return tuple(
            predictability_wald(sample, gamma_hat, estimator=est, cfg=cfg,
                                corrected=spec.corrected)
            for est in spec.estimators
        )
    hyp = Hypothesis(spec.hypothesis)
    return tuple(
        sup_wald(sample, grid, hyp, estimator=est, cfg=cfg, corrected=spec.corrected).sup_stat
        for est in spec.estimators
    )


def _run_chunk(spec: ExperimentSpec, cell_idx: int, cell, lo: int, hi: int):
    """Replications [lo, hi) of one cell: (values array, failure categories)."""
    width = 1 if spec.kind == "accuracy" else len(spec.estimators)
    values = np.full((hi - lo, width), np.nan)
    failures = []
    for rep in range(lo, hi):
        try:
            values[rep - lo] = _replicate(spec, cell_idx, cell, rep)
        except ThreshpredError as exc:
            failures.append((rep, type(exc).__name__))
    return cell_idx, lo, values, failures


def _critical_values(spec: ExperimentSpec, cells):
    """Reference critical values per (cell, estimator, level).

    The estimated-threshold predictability statistic is referenced against
    its chi-square limit with 2p degrees of freedom.  Sup-Wald statistics use
    simulated limit tables: the instrumented joint test has one pivotal table
    while the least-squares tables are matched to each cell's (c, phi), the
    oracle-critical-value convention (infeasible in practice where c is
    unknown).
    """
    out = {}
    if spec.kind == "accuracy":
        return out
    if spec.statistic == "wald-at-threshold":
        dof = 2 * spec.p
        for level in spec.nominal_levels:
            cv = float(spstats.chi2.ppf(1.0 - level, dof))
            for cell_idx in range(len(cells)):
                for est in spec.estimators:
                    out[(cell_idx, est, level)] = (cv, f"chi2({dof})")
        return out
    if not spec.on_demand_tables:
        raise MissingCriticalValues(
            "sup-wald experiments need simulated limit tables; enable on_demand_tables")
    quantile_levels = tuple(1.0 - lv for lv in spec.nominal_levels)
    persistence_combos = sorted({(c, phi) for _, c, phi in cells})
    tables = {}  # cache: one pivotal table, one least-squares table per (c, phi)
    for cell_idx, (n, c, phi) in enumerate(cells):
        for est in spec.estimators:
            if est == "ivx":
                key = "ivx"
                if key not in tables:
                    tables[key] = tabulate_critical_values(
                        "sup-wald-ivx-joint",
                        {"p": spec.p, "trimming": spec.trimming},
                        quantile_levels,
                        MeshSpec(steps=spec.table_steps, reps=spec.table_reps,
                                 seed=spec.seed),
                        version=__version__,
                    )
            else:
                key = ("ols", c, phi)
                if key not in tables:
                    functional = ("sup-wald-ols-joint" if spec.hypothesis == "joint"
                                  else "sup-wald-ols-linearity")
                    tables[key] = tabulate_critical_values(
                        functional,
                        {"p": spec.p, "trimming": spec.trimming,
                         "c": [c] * spec.p, "phi": [phi]},
                        quantile_levels,
                        MeshSpec(steps=spec.table_steps, reps=spec.table_reps,
                                 seed=spec.seed + 1 + persistence_combos.index((c, phi))),
                        version=__version__,
                    )
            table = tables[key]
            for level in spec.nominal_levels:
                cv = table.quantile(1.0 - level)
                out[(cell_idx, est, level)] = (cv, f"table:{table.functional}")
    return out


def run_experiment(spec: ExperimentSpec, n_workers: int = 1) -> ExperimentResult:
    """Run every cell of the experiment.

    Replication r of cell j draws from the stream ``(seed, j, r)``, so the
    result is identical for any ``n_workers``; workers only change the
    schedule.
    """
    cells = list(itertools.product(spec.n_list, spec.c_list, spec.phi_list))
    B = spec.replications
    critvals = _critical_values(spec, cells)

    tasks = []
    for cell_idx, cell in enumerate(cells):
        for lo in range(0, B, _REP_CHUNK):
            tasks.append((cell_idx, cell, lo, min(lo + _REP_CHUNK, B)))

    chunks = {}
    if n_workers <= 1:
        for cell_idx, cell, lo, hi in tasks:
            out = _run_chunk(spec, cell_idx, cell, lo, hi)
            chunks[(out[0], out[1])] = out
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_chunk, spec, *task) for task in tasks]
            for fut in futures:
                out = fut.result()
                chunks[(out[0], out[1])] = out

    records = []
    width = 1 if spec.kind == "accuracy" else len(spec.estimators)
    for cell_idx, (n, c, phi) in enumerate(cells):
        values = np.full((B, width), np.nan)
        failures = []
        for lo in range(0, B, _REP_CHUNK):
            _, _, vals, fails = chunks[(cell_idx, lo)]
            values[lo:lo + vals.shape[0]] = vals
            failures.extend(fails)
        ok = ~np.isnan(values[:, 0])
        n_ok = int(ok.sum())
        n_fail = B - n_ok
        base = {"kind": spec.kind, "n": int(n), "c": float(c), "phi": float(phi),
                "B": B, "failures": n_fail}
        if n_fail > 0.01 * B:
            diag = "; ".join(f"rep {r}: {cat}" for r, cat in failures[:5])
            records.append({**base, "estimator": "", "statistic": spec.statistic,
                            "metric": "", "level": None, "critical_value": None,
                            "critval_source": "", "value": None, "mc_se": None,
                            "status": f"aborted: {n_fail}/{B} failures ({diag})"})
            continue
        if spec.kind == "accuracy":
            err = values[ok, 0]
            rmse = float(np.sqrt(np.mean(err**2)))
            if n_ok >= 2 and rmse > 0:
                se = float(np.std(err**2, ddof=1) / np.sqrt(n_ok) / (2.0 * rmse))
            else:
                se = 0.0
            records.append({**base, "estimator": "ols-ssr", "statistic": "gamma-hat",
                            "metric": "rmse", "level": None, "critical_value": None,
                            "critval_source": "", "value": rmse, "mc_se": se,
                            "status": "ok"})
            records.append({**base, "estimator": "ols-ssr", "statistic": "gamma-hat",
                            "metric": "median_abs_error", "level": None,
                            "critical_value": None, "critval_source": "",
                            "value": float(np.median(np.abs(err))), "mc_se": None,
                            "status": "ok"})
            continue
        for j, est in enumerate(spec.estimators):
            stat_ok = values[ok, j]
            for level in spec.nominal_levels:
                cv, source = critvals[(cell_idx, est, level)]
                rate = float(np.mean(stat_ok > cv)) if n_ok else float("nan")
                se = float(np.sqrt(rate * (1.0 - rate) / n_ok)) if n_ok else None
                records.append({**base, "estimator": est, "statistic": spec.statistic,
                                "metric": "rejection_rate", "level": float(level),
                                "critical_value": float(cv), "critval_source": source,
                                "value": rate, "mc_se": se, "status": "ok"})

    provenance = {"version": __version__, "seed": spec.seed,
                  "spec_hash": spec_hash(spec.to_dict())}
    return ExperimentResult(spec=spec.to_dict(), records=records, provenance=provenance)


def spec_hash(spec_dict: dict) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(spec_dict, sort_keys=True).encode()).hexdigest()[:16]


# -- reporting ----------------------------------------------------------------


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def payload_to_csv(payload: dict) -> str:
    lines = [
        f"# schema: {payload['schema']}",
        f"# provenance: {json.dumps(payload['provenance'], sort_keys=True)}",
        f"# spec: {json.dumps(payload['spec'], sort_keys=True)}",
        ",".join(CSV_COLUMNS),
    ]
    for rec in payload["records"]:
        lines.append(",".join(_fmt_cell(rec[col]) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def payload_to_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def payload_to_markdown(payload: dict) -> str:
    prov = payload["provenance"]
    lines = [
        f"Monte Carlo summary (version {prov.get('version', '?')}, "
        f"seed {prov.get('seed', '?')}, spec {prov.get('spec_hash', '?')})",
        "",
        "| " + " | ".join(CSV_COLUMNS) + " |",
        "|" + "|".join("---" for _ in CSV_COLUMNS) + "|",
    ]
    for rec in payload["records"]:
        cells = []
        for col in CSV_COLUMNS:
            v = rec[col]
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(f"{v:.6g}")
            else:
                cells.append(str(v))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


_INT_COLS = {"n", "B", "failures"}
_FLOAT_COLS = {"c", "phi", "level", "critical_value", "value", "mc_se"}


def read_summary_csv(text: str) -> dict:
    """Parse a CSV summary back into the payload dict (lossless)."""
    schema = prov = spec = None
    records = []
    header = None
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("# schema: "):
            schema = line[len("# schema: "):]
        elif line.startswith("# provenance: "):
            prov = json.loads(line[len("# provenance: "):])
        elif line.startswith("# spec: "):
            spec = json.loads(line[len("# spec: "):])
        elif header is None:
            header = line.split(",")
        else:
            raw = line.split(",")
            rec = {}
            for col, cell in zip(header, raw):
                if cell == "":
                    rec[col] = None if col in _INT_COLS | _FLOAT_COLS else ""
                elif col in _INT_COLS:
                    rec[col] = int(cell)
                elif col in _FLOAT_COLS:
                    rec[col] = float(cell)
                else:
                    rec[col] = cell
            records.append(rec)
    return {"schema": schema, "provenance": prov, "spec": spec, "records": records}


def summarize(result: ExperimentResult, format: str = "markdown") -> str:
    """Render an experiment result as ``csv``, ``json`` or ``markdown``.

    Column order is stable and floats are written with full round-trip
    precision in the machine formats, so csv -> json -> csv is lossless.
    """
    payload = result.payload()
    if format == "csv":
        return payload_to_csv(payload)
    if format == "json":
        return payload_to_json(payload)
    if format == "markdown":
        return payload_to_markdown(payload)
    raise InvalidConfig("format must be 'csv', 'json' or 'markdown'")
