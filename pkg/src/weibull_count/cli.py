"""Command-line driver: ``fit``, ``pmf``, ``simulate`` and ``compare``.

Exit codes: 0 success, 1 input error, 2 fit did not converge.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .count_models import (
    DEFAULT_TOL,
    GammaMixParams,
    WeibullCountParams,
    moments_from_pmf,
    nbd_pmf,
    poisson_pmf,
    tilted_series,
    weibull_count_pmf,
    weibull_count_pmf_table,
    weibull_gamma_pmf,
    weibull_gamma_pmf_table,
)
from .data import ColumnBindings, DataError, parse_dataset, dataset_to_csv
from .inference import (
    MODEL_NAMES,
    FitOptions,
    ModelSpec,
    bootstrap_se,
    fit_lattice,
    fit_mle,
    format_report,
    likelihood_ratio_report,
)
from .series import ResourceLimitError, SeriesConvergenceError
from .simulation import Covariate, SimConfig, empirical_pmf, simulate_counts, simulate_dataset

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


class InputError(ValueError):
    pass


def _names(text: str | None) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip()) if text else ()


def _fixed(items) -> dict[str, float]:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--fix expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"--fix {name}: not a number: {value!r}") from None
    return out


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _dump(obj) -> str:
    # repr-based float output round-trips every double exactly
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False, allow_nan=False)


def _load(args, covariates: tuple[str, ...]):
    bindings = ColumnBindings(args.count, covariates, args.exposure, getattr(args, "weight", None))
    ds = parse_dataset(args.data, bindings)
    if args.exposure is None and args.t != 1.0:
        ds.exposure[:] = args.t
    return ds


def _fit_report(fit, boot=None) -> dict:
    params = {k: v for k, v in fit.params.items() if k != "beta"}
    if fit.model.covariates:
        params["beta"] = list(fit.params["beta"])
    diag = dict(fit.diagnostics)
    diag.update(iterations=fit.iterations, covariates=list(fit.covariate_names), model_index=fit.model.index)
    if boot is not None:
        diag["bootstrap"] = dict(replicates=boot.replicates, dropped=boot.dropped)
    se = None
    if boot is not None:
        se = {k: v for k, v in boot.se.items() if k not in fit.covariate_names}
        if fit.model.covariates:
            se["beta"] = [boot.se.get(n) for n in fit.covariate_names]
    return dict(model=fit.model.name, params=params, log_likelihood=fit.log_likelihood,
                converged=fit.converged, bootstrap_se=se, diagnostics=diag)


def _fit_table(fit, boot=None) -> str:
    lines = [f"model {fit.model}", f"log-likelihood {fit.log_likelihood:.6f}",
             f"converged {fit.converged}" + ("  (at parameter cap)" if fit.diagnostics.get("boundary") else ""),
             f"{'parameter':<16}{'estimate':>16}{'boot SE':>14}"]
    for name, value in fit.flat_params().items():
        se = boot.se.get(name) if boot is not None else None
        se_txt = f"{se:>14.6g}" if se is not None else f"{'-':>14}"
        lines.append(f"{name:<16}{value:>16.8g}{se_txt}")
    return "\n".join(lines)


def _emit(args, table: str, report) -> None:
    if args.json == "-":
        print(table, file=sys.stderr)
        print(_dump(report))
    else:
        print(table)
        if args.json:
            Path(args.json).write_text(_dump(report) + "\n", encoding="utf-8")


def run_fit(args) -> int:
    spec = ModelSpec.from_name(args.model)
    covariates = _names(args.covariates)
    if spec.covariates and not covariates:
        raise InputError(f"model {args.model} needs --covariates")
    if covariates and not spec.covariates:
        raise InputError(f"model {args.model} takes no covariates; use {MODEL_NAMES[spec.index + 1]}")
    ds = _load(args, covariates)
    options = FitOptions(tol=args.tol, starts=args.starts, seed=args.seed, fixed=_fixed(args.fix),
                         center=args.center, optimizer=args.optimizer)
    fit = fit_mle(ds, spec, options)
    boot = None
    if args.bootstrap:
        if not fit.converged:
            print("base fit did not converge; bootstrap skipped", file=sys.stderr)
        else:
            boot = bootstrap_se(ds, spec, args.bootstrap, args.seed, options, base=fit)
            fit.bootstrap_se = boot.se
    _emit(args, _fit_table(fit, boot), _fit_report(fit, boot))
    return EXIT_OK if fit.converged else EXIT_NOT_CONVERGED


def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise InputError(f"model {args.model} needs " + ", ".join(f"--{n}" for n in missing))


def run_pmf_table(args) -> int:
    model = args.model
    try:
        probs = _pmf_probs(args)
    except SeriesConvergenceError as exc:
        return _pmf_rows_only(args, exc)
    mean, var = moments_from_pmf(probs)
    shown = probs if args.i_max is None else probs[: args.i_max + 1]
    lines = [f"{'i':>4}  pmf"] + [f"{i:>4}  {p:.12g}" for i, p in enumerate(shown)]
    lines += [f"mass {math.fsum(probs):.15g} over i = 0..{probs.size - 1}", f"mean {mean:.10g}", f"variance {var:.10g}"]
    report = dict(model=model, pmf=list(map(float, shown)), mean=mean, variance=var,
                  mass=math.fsum(probs), support=int(probs.size - 1))
    _emit(args, "\n".join(lines), report)
    return EXIT_OK


def _pmf_rows_only(args, exc) -> int:
    # the tail did not close: evaluate the requested rows one by one
    i_max = 10 if args.i_max is None else args.i_max
    lines, values = [f"{'i':>4}  pmf"], []
    for i in range(i_max + 1):
        try:
            v = float(_pmf_row(args, i))
            lines.append(f"{i:>4}  {v:.12g}")
        except SeriesConvergenceError as row_exc:
            v = None
            lines.append(f"{i:>4}  not converged ({row_exc})")
        values.append(v)
    lines.append(f"moments unavailable: {exc}")
    report = dict(model=args.model, pmf=values, mean=None, variance=None, error=str(exc))
    _emit(args, "\n".join(lines), report)
    return EXIT_NOT_CONVERGED


def _pmf_row(args, i: int) -> float:
    lam = args.__dict__["lambda"]
    if args.model == "poisson":
        return poisson_pmf(lam * args.t, i)
    if args.model == "nbd":
        return nbd_pmf(args.r, args.alpha, args.t, i)
    if args.model == "weibull":
        return weibull_count_pmf(WeibullCountParams(lam, args.c), args.t, i, args.tol).value
    return weibull_gamma_pmf(GammaMixParams(args.r, args.alpha, args.c), args.t, i, args.tol).value


def _pmf_probs(args) -> np.ndarray:
    model = args.model
    if model == "poisson":
        _require(args, "lambda")
        mu = args.__dict__["lambda"] * args.t
        probs = _closed_table(lambda ks: poisson_pmf(mu, ks), args)
    elif model == "nbd":
        _require(args, "r", "alpha")
        probs = _closed_table(lambda ks: nbd_pmf(args.r, args.alpha, args.t, ks), args)
    elif model == "weibull":
        _require(args, "lambda", "c")
        params = WeibullCountParams(args.__dict__["lambda"], args.c)
        if args.method == "tilted":
            log_u = math.log(params.lam) + params.c * math.log(args.t)
            probs = _closed_table(lambda ks: tilted_series(params.c, ks, log_u, args.tol).value, args)
        else:
            probs = weibull_count_pmf_table(params, args.t, args.tol)
    elif model == "weibull-gamma":
        _require(args, "r", "alpha", "c")
        params = GammaMixParams(args.r, args.alpha, args.c)
        if args.method == "tilted":
            log_x = params.c * math.log(args.t) - math.log(params.alpha)
            probs = _closed_table(lambda ks: tilted_series(params.c, ks, log_x, args.tol, params.r).value, args)
        else:
            probs = weibull_gamma_pmf_table(params, args.t, args.tol)
    else:
        raise InputError(f"pmf supports poisson, nbd, weibull, weibull-gamma; got {model!r}")
    return probs


def _closed_table(fn, args) -> np.ndarray:
    # evaluate blocks until the accumulated mass closes within tol
    probs: list[float] = []
    i = 0
    while True:
        ks = np.arange(i, i + 32)
        probs.extend(float(v) for v in np.atleast_1d(fn(ks)))
        if math.fsum(probs) >= 1.0 - args.tol or i > 4096:
            break
        i += 32
    cum = np.cumsum(probs)
    last = int(np.searchsorted(cum, 1.0 - args.tol)) if cum[-1] >= 1.0 - args.tol else len(probs) - 1
    return np.array(probs[: last + 1])


def _sim_config(args, n: int) -> SimConfig:
    covs = []
    for item in args.covariate or ():
        name, _, rest = item.partition("=")
        kind, *nums = (rest or "normal").split(":")
        vals = [float(v) for v in nums]
        defaults = {"normal": [0.0, 1.0], "bernoulli": [0.5, 0.0], "uniform": [0.0, 1.0]}
        if kind not in defaults:
            raise InputError(f"covariate kind must be normal, bernoulli or uniform; got {kind!r}")
        a, b = (vals + defaults[kind][len(vals):])[:2]
        covs.append(Covariate(name.strip(), kind, a, b))
    beta = tuple(float(b) for b in _names(args.beta))
    if len(beta) != len(covs):
        raise InputError(f"--beta has {len(beta)} values for {len(covs)} covariates")
    if args.model in ("weibull", "poisson"):
        _require(args, "lambda")
        c = 1.0 if args.model == "poisson" else args.c
        if c is None:
            raise InputError("model weibull needs --c")
        params = WeibullCountParams(args.__dict__["lambda"], c)
    elif args.model in ("weibull-gamma", "nbd"):
        _require(args, "r", "alpha")
        c = 1.0 if args.model == "nbd" else args.c
        if c is None:
            raise InputError("model weibull-gamma needs --c")
        params = GammaMixParams(args.r, args.alpha, c)
    else:
        raise InputError(f"simulate supports poisson, nbd, weibull, weibull-gamma; got {args.model!r}")
    return SimConfig(params, args.t, n, args.seed, beta, tuple(covs))


def run_simulate(args) -> int:
    config = _sim_config(args, args.n)
    if args.summary:
        _, counts = simulate_counts(config)
        pmf = empirical_pmf(counts)
        lines = [f"draws {counts.size}", f"mean {counts.mean():.6f}", f"variance {counts.var(ddof=1):.6f}",
                 f"{'i':>4}  frequency"] + [f"{i:>4}  {p:.6f}" for i, p in enumerate(pmf)]
        report = dict(draws=int(counts.size), mean=float(counts.mean()), variance=float(counts.var(ddof=1)),
                      pmf=list(map(float, pmf)))
        _emit(args, "\n".join(lines), report)
        return EXIT_OK
    text = dataset_to_csv(simulate_dataset(config), count_name=args.count_name, exposure_name=args.exposure_name)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def run_compare(args) -> int:
    covariates = _names(args.covariates)
    ds = _load(args, covariates)
    models = [MODEL_NAMES.index(m) for m in _names(args.models)] if args.models else list(range(8))
    options = FitOptions(tol=args.tol, starts=args.starts, seed=args.seed)
    fits = fit_lattice(ds, options, models)
    rows = likelihood_ratio_report(list(fits.values()))
    report = dict(models=rows, fits={MODEL_NAMES[k]: _fit_report(f) for k, f in fits.items()})
    _emit(args, format_report(rows), report)
    return EXIT_OK if all(f.converged for f in fits.values()) else EXIT_NOT_CONVERGED


def _data_args(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--count", required=True, help="column holding the counts")
    p.add_argument("--covariates", help="comma-separated covariate columns (no intercept is added; lambda plays that role)")
    p.add_argument("--exposure", help="column holding exposure times (default: --t for every row)")
    p.add_argument("--weight", help="column holding observation weights")
    p.add_argument("--t", type=float, default=1.0, help="common exposure when no --exposure column (default 1)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--starts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", metavar="PATH", help="write the structured report here ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weibull-count", description="Weibull count models: fitting, tables, simulation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood fit of one model")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    _data_args(p)
    p.add_argument("--bootstrap", type=int, default=0, metavar="B", help="bootstrap replicates (0 = off)")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE", help="hold a parameter fixed (repeatable)")
    p.add_argument("--center", action="store_true", help="center covariates at their weighted means")
    p.add_argument("--optimizer", default="nelder-mead", choices=("nelder-mead", "quasi-newton"))
    p.set_defaults(func=run_fit)

    p = sub.add_parser("pmf", help="pmf table with mean/variance footer")
    p.add_argument("--model", required=True, choices=("poisson", "nbd", "weibull", "weibull-gamma"))
    p.add_argument("--lambda", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--i-max", type=int, help="last row shown (moments always use the closed tail)")
    p.add_argument("--method", default="series", choices=("series", "tilted"))
    p.add_argument("--json", metavar="PATH")
    p.set_defaults(func=run_pmf_table)

    p = sub.add_parser("simulate", help="simulate a renewal-count dataset")
    p.add_argument("--model", required=True, choices=("poisson", "nbd", "weibull", "weibull-gamma"))
    p.add_argument("--lambda", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--covariate", action="append", metavar="NAME=KIND[:A[:B]]",
                   help="covariate generator: normal:mean:sd, bernoulli:p or uniform:lo:hi")
    p.add_argument("--beta", help="comma-separated coefficients, one per --covariate")
    p.add_argument("--summary", action="store_true", help="print empirical moments and pmf instead of CSV")
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.add_argument("--count-name", default="count")
    p.add_argument("--exposure-name", default="t")
    p.add_argument("--json", metavar="PATH")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("compare", help="fit the model lattice and report nested log-likelihood gains")
    _data_args(p)
    p.add_argument("--models", help="comma-separated subset of model names")
    p.set_defaults(func=run_compare)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, DataError, FileNotFoundError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SeriesConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
