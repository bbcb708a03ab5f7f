"""Command-line interface.

Subcommands mirror the library: ``simulate``, ``estimate``, ``test``,
``ivx``, ``fit-persistence``, ``critvals``, ``mc`` and ``analyze``.  A JSON
config file can predefine any option (keys are the option names with
underscores); explicit flags override file values.  Every output embeds the
tool version, a hash of the fully-resolved configuration and the seed.
Outputs contain no wall-clock timestamps, so equal configurations produce
byte-identical files; run timing goes to stderr logging instead.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
error, 5 missing critical values.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
from scipy import stats as spstats

from . import __version__
from .dataio import ColumnMapping, parse_dataset, write_series_csv
from .dgp import (
    CovarianceSpec,
    PersistenceSpec,
    ThresholdDgpSpec,
    gen_threshold_sample,
)
from .errors import InvalidConfig, ThreshpredError
from .estimate import build_threshold_grid, estimate_threshold
from .ivx import IvxConfig, ivx_fit
from .limitsim import (
    FUNCTIONAL_ALIASES,
    FUNCTIONALS,
    MeshSpec,
    draw_joint_sup_limit_ivx,
    draw_joint_sup_limit_ols,
    draw_linearity_sup_limit,
    tabulate_critical_values,
)
from .mc import ExperimentSpec, run_experiment, summarize
from .persistence import fit_persistence
from .wald import Hypothesis, predictability_wald, sup_wald

log = logging.getLogger("threshpred")


def _config_hash(resolved: dict) -> str:
    canon = json.dumps(resolved, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _provenance(args: argparse.Namespace) -> dict:
    resolved = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    return {
        "version": __version__,
        "config_hash": _config_hash(resolved),
        "seed": getattr(args, "seed", None),
        "resolved_config": resolved,
    }


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n",
                          encoding="utf-8")
    log.info("wrote %s", path)


def _mapping(args) -> ColumnMapping:
    return ColumnMapping(y=args.y_col, x=tuple(args.x_cols), q=args.q_col,
                         date=args.date_col)


def _add_data_options(sp):
    sp.add_argument("--data", required=True, help="input CSV file")
    sp.add_argument("--date-col", default="date")
    sp.add_argument("--y-col", default="y")
    sp.add_argument("--x-cols", nargs="+", default=["x1"])
    sp.add_argument("--q-col", default="q")


def _add_trimming(sp):
    sp.add_argument("--pi1", type=float, default=0.15, help="lower trimming quantile")
    sp.add_argument("--pi2", type=float, default=0.85, help="upper trimming quantile")


def _add_ivx_options(sp):
    sp.add_argument("--cz", type=float, default=1.0, help="instrument damping constant")
    sp.add_argument("--gammaz", type=float, default=0.95, help="instrument exponent in (0,1)")
    sp.add_argument("--ivx-corrected", action="store_true",
                    help="use the stochastic-coefficient corrected instrument "
                         "(simulated samples only)")


# -- subcommands --------------------------------------------------------------


def _cmd_simulate(args) -> int:
    p = args.p
    if args.preset == "benchmark":
        dgp = ThresholdDgpSpec(alpha=(0.0, 0.0), beta_base=np.zeros(p),
                               delta0=None if args.null else np.full(p, args.delta0),
                               tau=args.tau, gamma0=args.gamma0)
    else:
        raise InvalidConfig(f"unknown preset {args.preset!r}")
    pers = PersistenceSpec(c=np.full(p, args.c), phi=np.array([args.phi]), form=args.form)
    cov = CovarianceSpec(sigma_y=1.0, sigma_xx=np.eye(p), sigma_phiphi=np.eye(1),
                         cross_xy=np.full(p, args.endogeneity) if args.endogeneity else None)
    sample = gen_threshold_sample(dgp, pers, cov, args.n, args.seed)
    path = sample.path
    n = sample.n

    # raw series rows t = 0..n; the first y and last q are alignment
    # placeholders never consumed by the parser
    from datetime import date, timedelta

    start = date(2000, 1, 1)
    dates = [(start + timedelta(days=t)).isoformat() for t in range(n + 1)]
    cols = {"y": np.concatenate([[0.0], sample.y])}
    for j in range(p):
        cols[f"x{j+1}"] = path.x[:, j]
    cols["q"] = np.concatenate([sample.q_lag, [0.0]])
    u_phi = path.innovations.u_phi[:n]
    for j in range(u_phi.shape[1]):
        cols[f"uphi{j+1}"] = np.concatenate([[0.0], u_phi[:, j]])
    write_series_csv(args.out, dates, cols)
    log.info("simulated %d observations to %s", n, args.out)
    return 0


def _cmd_estimate(args) -> int:
    ds = parse_dataset(args.data, _mapping(args))
    sample = ds.to_sample(has_intercept=not args.no_intercept)
    grid = build_threshold_grid(sample, args.pi1, args.pi2)
    fit = estimate_threshold(sample, grid)
    payload = {
        "schema": "threshpred/threshold-fit/v1",
        "provenance": _provenance(args),
        "fit": fit.to_dict(),
    }
    _write_json(args.out, payload)
    return 0


def _cmd_test(args) -> int:
    ds = parse_dataset(args.data, _mapping(args))
    sample = ds.to_sample(has_intercept=not args.no_intercept)
    grid = build_threshold_grid(sample, args.pi1, args.pi2)
    cfg = IvxConfig(c_z=args.cz, gamma_z=args.gammaz)
    curve = sup_wald(sample, grid, Hypothesis(args.hypothesis), estimator=args.estimator,
                     cfg=cfg, corrected=args.ivx_corrected)
    record = curve.to_dict()
    record["pvalue_source"] = "none"
    payload = {
        "schema": "threshpred/sup-wald/v1",
        "provenance": _provenance(args),
        "result": record,
    }
    _write_json(args.out, payload)
    return 0


def _cmd_ivx(args) -> int:
    ds = parse_dataset(args.data, _mapping(args))
    sample = ds.to_sample(has_intercept=not args.no_intercept)
    cfg = IvxConfig(c_z=args.cz, gamma_z=args.gammaz)
    if args.gamma is None:
        grid = build_threshold_grid(sample, args.pi1, args.pi2)
        gamma = estimate_threshold(sample, grid).gamma_hat
        gamma_source = "estimated"
    else:
        gamma = args.gamma
        gamma_source = "given"
    fit = ivx_fit(sample, gamma, cfg, corrected=args.ivx_corrected)
    payload = {
        "schema": "threshpred/ivx-fit/v1",
        "provenance": _provenance(args),
        "gamma_source": gamma_source,
        "fit": fit.to_dict(),
    }
    _write_json(args.out, payload)
    return 0


def _cmd_fit_persistence(args) -> int:
    from .dataio import MIN_USABLE_ROWS  # noqa: F401  (shared contract)
    import csv as _csv

    with open(args.data, "r", encoding="utf-8", newline="") as fh:
        rows = list(_csv.reader(fh))
    header = [h.strip() for h in rows[0]]
    for name in [args.x_col, *args.exog_cols]:
        if name not in header:
            from .errors import MissingColumn

            raise MissingColumn(f"column {name!r} not in header {header}")
    xi = header.index(args.x_col)
    ei = [header.index(c) for c in args.exog_cols]
    x = np.array([float(r[xi]) for r in rows[1:]])
    exog_full = np.array([[float(r[j]) for j in ei] for r in rows[1:]])
    # raw row t drives the step from x_{t-1} to x_t, so drop the first row
    exog = exog_full[1:]
    fit = fit_persistence(x, exog, init=(args.c0, None))
    payload = {
        "schema": "threshpred/persistence-fit/v1",
        "provenance": _provenance(args),
        "fit": fit.to_dict(),
    }
    _write_json(args.out, payload)
    return 0


def _cmd_critvals(args) -> int:
    mesh = MeshSpec(steps=args.steps, reps=args.reps, seed=args.seed,
                    lambda_points=args.lambda_points)
    params = {
        "p": args.p,
        "trimming": (args.pi1, args.pi2),
        "c": [args.c] * args.p,
        "phi": [args.phi],
    }
    if FUNCTIONAL_ALIASES.get(args.functional, args.functional) == "threshold-argmax":
        params.update(delta0=[args.delta0] * args.p, f_gamma0=args.f_gamma0,
                      sigma_u=args.sigma_u, truncation=args.truncation)
    table = tabulate_critical_values(args.functional, params, args.levels, mesh,
                                     version=__version__)
    out = Path(args.out)
    _write_json(out.with_suffix(".json"), table.to_json_dict())
    out.with_suffix(".csv").write_text(table.csv_text(), encoding="utf-8")
    log.info("wrote %s.{json,csv}", out)
    return 0


def _cmd_mc(args) -> int:
    spec = ExperimentSpec(
        kind=args.kind,
        n_list=tuple(args.n_list),
        c_list=tuple(args.c_list),
        phi_list=tuple(args.phi_list),
        B=args.B,
        nominal_levels=tuple(args.levels),
        estimators=tuple(args.estimators),
        statistic=args.statistic,
        hypothesis=args.hypothesis,
        p=args.p,
        endogeneity=args.endogeneity,
        delta0=args.delta0,
        tau=args.tau,
        delta_fixed=args.delta_fixed,
        gamma0=args.gamma0,
        trimming=(args.pi1, args.pi2),
        cz=args.cz,
        gammaz=args.gammaz,
        corrected=args.ivx_corrected,
        seed=args.seed,
        table_reps=args.table_reps,
        table_steps=args.table_steps,
    )
    result = run_experiment(spec, n_workers=args.workers)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "mc.csv").write_text(summarize(result, "csv"), encoding="utf-8")
    (outdir / "mc.json").write_text(summarize(result, "json"), encoding="utf-8")
    (outdir / "mc.md").write_text(summarize(result, "markdown"), encoding="utf-8")
    log.info("wrote %s/mc.{csv,json,md}", outdir)
    return 0


def _cmd_analyze(args) -> int:
    ds = parse_dataset(args.data, _mapping(args))
    sample = ds.to_sample(has_intercept=not args.no_intercept)
    grid = build_threshold_grid(sample, args.pi1, args.pi2)
    fit = estimate_threshold(sample, grid)
    cfg = IvxConfig(c_z=args.cz, gamma_z=args.gammaz)
    mesh = MeshSpec(steps=args.steps, reps=args.pvalue_reps, seed=args.seed)

    tests = []
    for estimator in ("ols", "ivx"):
        for kind in ("linearity", "joint"):
            curve = sup_wald(sample, grid, Hypothesis(kind), estimator=estimator, cfg=cfg)
            record = curve.to_dict()
            record.pop("curve")
            record.pop("grid")
            record.update(_sup_wald_pvalue(args, curve, mesh))
            tests.append(record)

    stat_ols = predictability_wald(sample, fit.gamma_hat, estimator="ols", cfg=cfg)
    stat_ivx = predictability_wald(sample, fit.gamma_hat, estimator="ivx", cfg=cfg)
    dof = 2 * sample.p
    at_threshold = [
        {"estimator": est, "stat": stat, "dof": dof,
         "pvalue": float(spstats.chi2.sf(stat, dof)),
         "pvalue_source": f"chi2({dof})"}
        for est, stat in (("ols", stat_ols), ("ivx", stat_ivx))
    ]
    payload = {
        "schema": "threshpred/analysis/v1",
        "provenance": _provenance(args),
        "threshold_fit": {k: v for k, v in fit.to_dict().items() if k != "ssr_curve"},
        "sup_wald_tests": tests,
        "predictability_at_threshold": at_threshold,
    }
    _write_json(args.out, payload)
    return 0


def _sup_wald_pvalue(args, curve, mesh: MeshSpec) -> dict:
    """Simulated p-value for a sup-Wald record, where the limit law is known."""
    p = len(args.x_cols)
    trimming = (args.pi1, args.pi2)
    if curve.estimator == "ivx" and curve.hypothesis == "joint":
        draws = draw_joint_sup_limit_ivx(trimming, p, mesh)
        source = f"simulated:sup-wald-ivx-joint(reps={mesh.reps})"
    elif args.c is not None and args.phi is not None:
        c = np.full(p, args.c)
        phi = np.array([args.phi])
        cov = CovarianceSpec(sigma_y=1.0, sigma_xx=np.eye(p), sigma_phiphi=np.eye(1))
        if curve.hypothesis == "linearity":
            draws = draw_linearity_sup_limit(c, phi, cov, trimming, p, mesh)
            source = f"simulated:sup-wald-ols-linearity(reps={mesh.reps})"
        else:
            draws = draw_joint_sup_limit_ols(c, phi, cov, trimming, p, mesh)
            source = f"simulated:sup-wald-ols-joint(reps={mesh.reps})"
    else:
        return {"pvalue": None,
                "pvalue_source": "unavailable (least-squares limit laws need --c and --phi)"}
    return {"pvalue": float(np.mean(draws >= curve.sup_stat)), "pvalue_source": source}


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threshpred",
        description="Threshold predictive regression toolkit: simulation, estimation, "
                    "instrumented predictability tests and limit-law critical values.",
    )
    parser.add_argument("--config", help="JSON config file; flags override file values")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate a threshold sample to CSV")
    sp.add_argument("--preset", default="benchmark")
    sp.add_argument("--n", type=int, default=250)
    sp.add_argument("--p", type=int, default=2)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--phi", type=float, default=0.25)
    sp.add_argument("--form", choices=("exact", "expanded"), default="exact")
    sp.add_argument("--delta0", type=float, default=2.0)
    sp.add_argument("--tau", type=float, default=0.25)
    sp.add_argument("--gamma0", type=float, default=0.25)
    sp.add_argument("--endogeneity", type=float, default=0.0)
    sp.add_argument("--null", action="store_true", help="no threshold effect")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate the threshold location from CSV data")
    _add_data_options(sp)
    _add_trimming(sp)
    sp.add_argument("--no-intercept", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("test", help="sup-Wald threshold predictability test")
    _add_data_options(sp)
    _add_trimming(sp)
    _add_ivx_options(sp)
    sp.add_argument("--hypothesis", choices=("linearity", "joint"), default="linearity")
    sp.add_argument("--estimator", choices=("ols", "ivx"), default="ols")
    sp.add_argument("--no-intercept", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_test)

    sp = sub.add_parser("ivx", help="instrumented two-regime fit at a threshold")
    _add_data_options(sp)
    _add_trimming(sp)
    _add_ivx_options(sp)
    sp.add_argument("--gamma", type=float, default=None,
                    help="threshold; estimated when omitted")
    sp.add_argument("--no-intercept", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_ivx)

    sp = sub.add_parser("fit-persistence", help="NLLS persistence fit from a raw series")
    sp.add_argument("--data", required=True)
    sp.add_argument("--x-col", default="x1")
    sp.add_argument("--exog-cols", nargs="+", default=["uphi1"])
    sp.add_argument("--c0", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_fit_persistence)

    sp = sub.add_parser("critvals", help="simulate limit-law critical value tables")
    sp.add_argument("--functional", required=True,
                    help=f"one of {FUNCTIONALS} or aliases {tuple(FUNCTIONAL_ALIASES)}")
    sp.add_argument("--p", type=int, default=1)
    sp.add_argument("--c", type=float, default=0.0)
    sp.add_argument("--phi", type=float, default=0.0)
    _add_trimming(sp)
    sp.add_argument("--reps", type=int, default=10_000)
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--lambda-points", type=int, default=71)
    sp.add_argument("--levels", type=float, nargs="+", default=[0.90, 0.95, 0.99])
    sp.add_argument("--delta0", type=float, default=1.0)
    sp.add_argument("--f-gamma0", type=float, default=1.0)
    sp.add_argument("--sigma-u", type=float, default=1.0)
    sp.add_argument("--truncation", type=float, default=50.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output path prefix (.json/.csv added)")
    sp.set_defaults(func=_cmd_critvals)

    sp = sub.add_parser("mc", help="Monte Carlo size/power/accuracy experiments")
    sp.add_argument("--kind", choices=("accuracy", "size", "power"), required=True)
    sp.add_argument("--preset", default="benchmark")
    sp.add_argument("--n-list", type=int, nargs="+", default=[250, 500])
    sp.add_argument("--c-list", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0])
    sp.add_argument("--phi-list", type=float, nargs="+", default=[0.0, 0.05, 0.25, 0.50])
    sp.add_argument("--B", type=int, default=None)
    sp.add_argument("--levels", type=float, nargs="+", default=[0.05])
    sp.add_argument("--estimators", nargs="+", choices=("ols", "ivx"),
                    default=["ols", "ivx"])
    sp.add_argument("--statistic", choices=("wald-at-threshold", "sup-wald"),
                    default="wald-at-threshold")
    sp.add_argument("--hypothesis", choices=("linearity", "joint"), default="joint")
    sp.add_argument("--p", type=int, default=1)
    sp.add_argument("--endogeneity", type=float, default=0.0)
    sp.add_argument("--delta0", type=float, default=2.0)
    sp.add_argument("--tau", type=float, default=0.25)
    sp.add_argument("--delta-fixed", type=float, default=None)
    sp.add_argument("--gamma0", type=float, default=0.25)
    _add_trimming(sp)
    sp.add_argument("--cz", type=float, default=1.0)
    sp.add_argument("--gammaz", type=float, default=0.95)
    sp.add_argument("--ivx-corrected", action="store_true")
    sp.add_argument("--table-reps", type=int, default=20_000)
    sp.add_argument("--table-steps", type=int, default=1000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=_cmd_mc)

    sp = sub.add_parser("analyze", help="full pipeline: estimate, test, p-values")
    _add_data_options(sp)
    _add_trimming(sp)
    _add_ivx_options(sp)
    sp.add_argument("--no-intercept", action="store_true")
    sp.add_argument("--c", type=float, default=None,
                    help="persistence value for least-squares limit p-values")
    sp.add_argument("--phi", type=float, default=None)
    sp.add_argument("--pvalue-reps", type=int, default=2000)
    sp.add_argument("--steps", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # a config file only sets defaults; explicit flags win
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        pre, _ = parser.parse_known_args(argv)
    except SystemExit:
        return 2
    if pre.config:
        try:
            config = json.loads(Path(pre.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
            return 2
        if not isinstance(config, dict):
            print(json.dumps({"error": "config", "message": "config must be an object"}),
                  file=sys.stderr)
            return 2
        for action in parser._subparsers._group_actions:
            for sub in action.choices.values():
                known = {a.dest for a in sub._actions}
                sub.set_defaults(**{k: v for k, v in config.items() if k in known})
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ThreshpredError as exc:
        print(json.dumps({"error": exc.category, "type": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return exc.exit_code


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
