"""Command-line interface.

Subcommands: fit, cv, bootstrap, simulate, huber-factor.  All output is
JSON (plus a CSV table for simulate) with floats rendered at 17
significant digits, so repeated runs with the same seed are
byte-identical.  Exit codes: 0 on success, 1 for input problems (bad
files, options, scenario text), 2 for numerical failures.
"""

import argparse
import hashlib
import sys
from importlib import metadata

import numpy as np
from scipy import stats

from .asymptotics import (ERROR_DISTRIBUTIONS, huber_factor, population_k,
                          sandwich_avar)
from .datasets import DataError, ingest_csv, standardize_predictors
from .gmm import fit_ehr, fit_env_ls
from .huber import gee_solution, ols_fit
from .selection import RNG_ALGORITHM, bootstrap_se, cv_select_u
from .simulation import load_scenario, run_scenario

__all__ = ["main", "render_json"]

_NUMERIC_FAILURE = (np.linalg.LinAlgError, FloatingPointError,
                    ZeroDivisionError, ArithmeticError)

_Z_5PCT = float(stats.norm.ppf(0.975))


def _package_version():
    try:
        return metadata.version("envhuber")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(x):
    if isinstance(x, float):
        if not np.isfinite(x):
            return '"inf"' if x > 0 else ('"-inf"' if x < 0 else '"nan"')
        return format(x, ".17g")
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return "null"
    if isinstance(x, str):
        out = x.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{out}"'
    raise TypeError(f"cannot serialize {type(x)}")


def render_json(obj, indent=0):
    """Deterministic JSON with floats at 17 significant digits.

    Non-finite floats render as the strings "inf", "-inf", "nan".
    Dict insertion order is preserved, so identical report dicts give
    identical bytes.
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{_fmt(str(k))}: {render_json(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        simple = all(isinstance(v, (int, float, bool, str, type(None)))
                     for v in seq)
        if simple:
            return "[" + ", ".join(_fmt(_pyval(v)) for v in seq) + "]"
        items = [f"{inner}{render_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, np.ndarray):
        return render_json(obj.tolist(), indent)
    return _fmt(_pyval(obj))


def _pyval(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _clean(obj):
    """Recursively convert numpy scalars/arrays for hashing and output."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return _pyval(obj)


def _config_hash(config):
    return hashlib.sha256(render_json(_clean(config)).encode()).hexdigest()


def _emit(report, out):
    text = render_json(_clean(report)) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _wrap(command, config, body):
    report = {
        "command": command,
        "version": _package_version(),
        "rng": RNG_ALGORITHM,
        "seed": config.get("seed"),
        "config": config,
        "config_hash": _config_hash(config),
    }
    report.update(body)
    return report


def _load_table(args):
    table = ingest_csv(args.data, args.response)
    scales = None
    X = table.X
    if args.standardize:
        X, scales = standardize_predictors(X)
    info = {
        "path": args.data,
        "response": table.response,
        "features": table.features,
        "n": X.shape[0],
        "p": X.shape[1],
        "standardize": bool(args.standardize),
        "scales": None if scales is None else [float(s) for s in scales],
    }
    return table.y, X, table.features, scales, info


def _inference_block(beta, se_beta):
    z = [float(b) / s if s > 0 else float("inf") * np.sign(b)
         for b, s in zip(beta, se_beta)]
    return {
        "se_beta": [float(s) for s in se_beta],
        "z_beta": [float(v) for v in z],
        "significant_5pct": [bool(abs(v) > _Z_5PCT) for v in z],
    }


def _original_scale(beta, scales):
    if scales is None:
        return None
    return [float(b / s) for b, s in zip(beta, scales)]


def cmd_fit(args):
    y, X, features, scales, data_info = _load_table(args)
    est = args.estimator
    fit_opts = {}
    if args.max_iter is not None:
        fit_opts["max_iter"] = args.max_iter

    body = {"data": data_info, "estimator": est}
    if est in ("ehr", "env"):
        u = args.u
        cv_report = None
        if u is None:
            cv_report = cv_select_u(y, X, estimator=est, folds=args.cv_folds,
                                    seed=args.seed, fit_opts=fit_opts)
            u = cv_report.u_best
        fit = (fit_ehr if est == "ehr" else fit_env_ls)(y, X, u, **fit_opts)
        se = fit.standard_errors()
        se_beta = se[1:1 + X.shape[1]]
        body.update({
            "u": int(u),
            "u_source": "cv" if cv_report is not None else "given",
            "k": float(fit.k),
            "cv": None if cv_report is None else cv_report.to_dict(),
            "estimates": {
                "mu": float(fit.mu),
                "beta": [float(b) for b in fit.beta],
                "beta_original_scale": _original_scale(fit.beta, scales),
                "mu_x": [float(v) for v in fit.params.mu_x],
                "sigma_x": fit.params.sigma_x,
                "envelope": {
                    "eta": fit.canon.eta,
                    "gamma": fit.canon.gamma,
                    "omega": fit.canon.omega,
                    "omega0": fit.canon.omega0,
                },
            },
            "objective": float(fit.objective),
            "objective_init": float(fit.objective_init),
            "optimizer": {
                "iterations": int(fit.nm_iterations),
                "evals": int(fit.nm_evals),
                "converged": bool(fit.nm_converged),
                "restarts": int(fit.nm_restarts),
                "starts_tried": int(fit.starts_tried),
                "start_used": fit.start_used,
                "init_flagged": bool(fit.init_flagged),
            },
            "weighting": {
                "cond": float(fit.delta_cond),
                "ridged": bool(fit.delta_ridged),
            },
            "inference": {"se_mu": float(se[0]),
                          **_inference_block(fit.beta, se_beta)},
        })
    else:
        gee = gee_solution(y, X) if est == "hr" else \
            gee_solution(y, X, k=np.inf)
        avar = sandwich_avar(y, X, gee)
        n, p = X.shape
        se = np.sqrt(np.maximum(np.diag(avar)[:1 + p], 0.0) / n)
        body.update({
            "u": None,
            "u_source": None,
            "k": float(gee.k),
            "estimates": {
                "mu": float(gee.mu),
                "beta": [float(b) for b in gee.beta],
                "beta_original_scale": _original_scale(gee.beta, scales),
                "mu_x": [float(v) for v in gee.mu_x],
                "sigma_x": gee.sigma_x,
            },
            "objective": float(gee.fit.objective),
            "inference": {"se_mu": float(se[0]),
                          **_inference_block(gee.beta, se[1:])},
        })

    if args.bootstrap:
        u_for_boot = body.get("u")
        boot = bootstrap_se(y, X, estimator=est, u=u_for_boot,
                            B=args.bootstrap, seed=args.seed,
                            workers=args.threads, fit_opts=fit_opts)
        body["bootstrap"] = boot.to_dict()

    config = _args_config(args, ["data", "response", "estimator", "u",
                                 "cv_folds", "seed", "standardize",
                                 "bootstrap", "threads", "max_iter"])
    _emit(_wrap("fit", config, body), args.out)
    return 0


def cmd_cv(args):
    y, X, _, _, data_info = _load_table(args)
    u_values = None
    if args.u_max is not None:
        u_values = list(range(1, args.u_max + 1))
    report = cv_select_u(y, X, estimator=args.estimator, folds=args.cv_folds,
                         seed=args.seed, u_values=u_values)
    config = _args_config(args, ["data", "response", "estimator", "cv_folds",
                                 "seed", "standardize", "u_max"])
    _emit(_wrap("cv", config, {"data": data_info, "cv": report.to_dict()}),
          args.out)
    return 0


def cmd_bootstrap(args):
    y, X, _, _, data_info = _load_table(args)
    report = bootstrap_se(y, X, estimator=args.estimator, u=args.u,
                          B=args.bootstrap, seed=args.seed,
                          workers=args.threads)
    config = _args_config(args, ["data", "response", "estimator", "u",
                                 "bootstrap", "seed", "standardize",
                                 "threads"])
    _emit(_wrap("bootstrap", config,
                {"data": data_info, "bootstrap": report.to_dict()}), args.out)
    return 0


def cmd_simulate(args):
    scn = load_scenario(args.scenario)
    if args.seed is not None:
        scn.seed = args.seed
    result = run_scenario(scn, workers=args.threads)
    config = _args_config(args, ["scenario", "seed", "threads"])
    config["seed"] = scn.seed
    config["scenario_resolved"] = scn.to_dict()
    report = _wrap("simulate", config, result.to_dict())
    if args.out:
        with open(args.out + ".json", "w", encoding="utf-8") as fh:
            fh.write(render_json(_clean(report)) + "\n")
        with open(args.out + ".csv", "w", encoding="utf-8") as fh:
            fh.write(result.to_csv())
    else:
        sys.stdout.write(render_json(_clean(report)) + "\n")
    return 0


def cmd_huber_factor(args):
    rows = []
    for name, dist in ERROR_DISTRIBUTIONS.items():
        k = population_k(dist)
        fac = huber_factor(dist, k)
        ratio = dist.var / fac
        rows.append({"error": name, "k": float(k), "huber_factor": float(fac),
                     "variance": float(dist.var), "variance_ratio": float(ratio)})
    config = _args_config(args, [])
    _emit(_wrap("huber-factor", config, {"table": rows}), args.out)
    return 0


def _args_config(args, keys):
    return {k: getattr(args, k) for k in keys}


class _Parser(argparse.ArgumentParser):
    # input contract violations exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_with(message))

    def exit_with(self, message):
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        return 1


def _add_table_args(p):
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--response", required=True,
                   help="response column name in the CSV header")
    p.add_argument("--standardize", action="store_true",
                   help="rescale predictors to unit sample SD before fitting")


def build_parser():
    parser = _Parser(prog="envhuber",
                     description="Huber regression with an estimated "
                                 "immaterial predictor subspace removed")
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one estimator on a CSV table")
    _add_table_args(p)
    p.add_argument("--estimator", choices=["ehr", "env", "hr", "ls"],
                   default="ehr")
    p.add_argument("--u", type=int, default=None,
                   help="envelope dimension; cross-validated when omitted")
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bootstrap", type=int, default=0, metavar="B",
                   help="add pairs-bootstrap SDs from B resamples")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=None,
                   help="optimizer iteration cap override")
    p.add_argument("--out", default=None, help="write JSON here, not stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validate the envelope dimension")
    _add_table_args(p)
    p.add_argument("--estimator", choices=["ehr", "env"], default="ehr")
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--u-max", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bootstrap", help="pairs-bootstrap slope SDs")
    _add_table_args(p)
    p.add_argument("--estimator", choices=["ehr", "env", "hr", "ls"],
                   default="ehr")
    p.add_argument("--u", type=int, default=None)
    p.add_argument("--bootstrap", type=int, default=200, metavar="B")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("--scenario", required=True, help="flat key=value file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None,
                   help="output prefix; writes <out>.json and <out>.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("huber-factor",
                       help="efficiency factor table for the reference laws")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_huber_factor)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except _NUMERIC_FAILURE as e:
        # before ValueError: LinAlgError subclasses it in numpy >= 1.25
        sys.stderr.write(f"envhuber: numerical failure: {e}\n")
        return 2
    except (DataError, OSError, ValueError) as e:
        sys.stderr.write(f"envhuber: input error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
