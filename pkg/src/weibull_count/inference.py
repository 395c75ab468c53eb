"""Weighted log-likelihood, maximum likelihood and bootstrap for models [0]-[7].

Models cross three switches: exponential vs Weibull spells (c fixed at 1 or
free), gamma heterogeneity on the rate, and proportional-hazards covariates.
Positive parameters are optimised on the log scale; regression coefficients
are unconstrained.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .count_models import DEFAULT_TOL, log_rising, tilted_series
from .data import CountDataset
from .regression import linear_predictors, weighted_means
from .series import ResourceLimitError, SeriesConvergenceError

PMF_FLOOR = 1e-300
LOG_CAP = math.log(1e8)

MODEL_NAMES = ("poisson", "poisson-reg", "nbd", "nbd-reg",
               "weibull", "weibull-reg", "weibull-gamma", "weibull-gamma-reg")


@dataclass(frozen=True)
class ModelSpec:
    family: str = "weibull"
    heterogeneity: bool = False
    covariates: bool = False

    def __post_init__(self):
        if self.family not in ("exponential", "weibull"):
            raise ValueError(f"family must be 'exponential' or 'weibull', got {self.family!r}")

    @property
    def index(self) -> int:
        return 4 * (self.family == "weibull") + 2 * self.heterogeneity + self.covariates

    @property
    def name(self) -> str:
        return MODEL_NAMES[self.index]

    @classmethod
    def from_index(cls, k: int) -> "ModelSpec":
        if not 0 <= k <= 7:
            raise ValueError(f"model index must be 0..7, got {k}")
        return cls("weibull" if k & 4 else "exponential", bool(k & 2), bool(k & 1))

    @classmethod
    def from_name(cls, name: str) -> "ModelSpec":
        try:
            return cls.from_index(MODEL_NAMES.index(name))
        except ValueError:
            raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}") from None

    def positive_names(self) -> list[str]:
        names = ["r", "alpha"] if self.heterogeneity else ["lambda"]
        if self.family == "weibull":
            names.append("c")
        return names

    def parents(self) -> list["ModelSpec"]:
        """Models nested directly inside this one (one switch turned off)."""
        k = self.index
        return [ModelSpec.from_index(k & ~bit) for bit in (4, 2, 1) if k & bit]

    def __str__(self) -> str:
        return f"[{self.index}] {self.name}"


OPTIMIZERS = ("nelder-mead", "quasi-newton")


@dataclass(frozen=True)
class FitOptions:
    """``optimizer`` is the simplex (refined by finite-difference L-BFGS-B when
    ``refine``) or the quasi-Newton step alone; ``bootstrap_optimizer`` is used
    for replicate refits, which start at the base estimate.  ``fatol`` applies
    to the log-likelihood per unit weight."""

    tol: float = DEFAULT_TOL
    max_iter: int = 4000
    starts: int = 3
    seed: int = 0
    jitter: float = 0.3
    optimizer: str = "nelder-mead"
    bootstrap_optimizer: str = "quasi-newton"
    refine: bool = True
    center: bool = False
    fixed: Mapping[str, float] = field(default_factory=dict)
    xatol: float = 1e-4
    fatol: float = 1e-9

    def __post_init__(self):
        for name in ("optimizer", "bootstrap_optimizer"):
            if getattr(self, name) not in OPTIMIZERS:
                raise ValueError(f"{name} must be one of {OPTIMIZERS}")
        if self.starts < 1:
            raise ValueError("starts must be >= 1")


@dataclass
class FitResult:
    model: ModelSpec
    params: dict
    log_likelihood: float
    converged: bool
    iterations: int
    covariate_names: tuple[str, ...] = ()
    bootstrap_se: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return len(self.model.positive_names()) + len(self.params.get("beta", ())) - len(
            self.diagnostics.get("fixed", {}))

    def flat_params(self) -> dict[str, float]:
        out = {k: v for k, v in self.params.items() if k != "beta"}
        for name, b in zip(self.covariate_names, self.params.get("beta", ())):
            out[name] = b
        return out


# --- likelihood --------------------------------------------------------------


@dataclass
class _Prepared:
    """Active rows collapsed to unique (count, exposure, covariates) with summed weights."""

    counts: np.ndarray
    log_t: np.ndarray
    x: np.ndarray
    weights: np.ndarray
    center: np.ndarray | None


def prepare(dataset: CountDataset, spec: ModelSpec, center: bool = False) -> _Prepared:
    if spec.covariates and dataset.n_covariates == 0:
        raise ValueError(f"model {spec} needs covariates but the dataset has none")
    live = dataset.weights > 0
    x = dataset.covariates if spec.covariates else np.zeros((len(dataset), 0))
    means = weighted_means(x, dataset.weights) if (center and spec.covariates) else None
    key = np.column_stack([dataset.counts[live].astype(float), dataset.exposure[live], x[live]])
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    w = np.zeros(uniq.shape[0])
    np.add.at(w, inverse.reshape(-1), dataset.weights[live])
    return _Prepared(uniq[:, 0].astype(int), np.log(uniq[:, 1]), uniq[:, 2:], w, means)


def _log_pmf(prep: _Prepared, spec: ModelSpec, params: Mapping, tol: float) -> tuple[np.ndarray, dict]:
    beta = np.asarray(params.get("beta", ()), dtype=float) if spec.covariates else np.zeros(0)
    eta = linear_predictors(prep.x, beta, prep.center) if spec.covariates else 0.0
    c = float(params["c"]) if spec.family == "weibull" else 1.0
    k = prep.counts
    info = {"max_cancellation": 1.0, "max_terms": 0, "quadrature_rows": 0}
    if not spec.heterogeneity:
        log_u = math.log(params["lambda"]) + c * prep.log_t + eta
        if spec.family == "exponential":
            return k * log_u - np.exp(log_u) - gammaln(k + 1.0), info
        res = tilted_series(c, k, log_u, tol)
    else:
        r = float(params["r"])
        log_x = c * prep.log_t + eta - math.log(params["alpha"])
        if spec.family == "exponential":
            lr = log_rising(r, k)
            return lr - gammaln(k + 1.0) - r * np.logaddexp(0.0, log_x) + k * (log_x - np.logaddexp(0.0, log_x)), info
        res = tilted_series(c, k, log_x, tol, r)
        info["quadrature_rows"] = int(np.sum(res.method == "quadrature"))
    if not res.converged.all():
        bad = int(np.flatnonzero(~res.converged)[0])
        raise SeriesConvergenceError(f"pmf out of range at count {k[bad]} (value {res.value[bad]!r})")
    info["max_cancellation"] = float(res.cancellation_ratio.max(initial=1.0))
    info["max_terms"] = int(res.terms_used.max(initial=0))
    with np.errstate(divide="ignore"):
        return np.log(res.value), info


def log_likelihood(dataset: CountDataset | _Prepared, spec: ModelSpec, params: Mapping,
                   tol: float = DEFAULT_TOL, *, center: bool = False, diagnostics: dict | None = None) -> float:
    """Sum of weight * ln pmf over observations; zero-weight rows are skipped.

    A pmf at or below 1e-300 contributes ln(1e-300) and sets
    ``diagnostics['floored']``.
    """
    prep = dataset if isinstance(dataset, _Prepared) else prepare(dataset, spec, center)
    if prep.counts.size == 0:
        return 0.0
    logp, info = _log_pmf(prep, spec, params, tol)
    floor = math.log(PMF_FLOOR)
    low = ~(logp > floor)
    if low.any():
        logp = np.where(low, floor, logp)
    if diagnostics is not None:
        diagnostics.update(info)
        diagnostics["floored"] = int(low.sum())
    return exact_dot(prep.weights, logp)


def _split(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Veltkamp: a = hi + lo with hi holding 26 significant bits
    t = 134217729.0 * a
    hi = t - (t - a)
    return hi, a - hi


def exact_dot(w: np.ndarray, v: np.ndarray) -> float:
    """Correctly rounded sum of w * v: each product is split exactly into
    value plus rounding error (Dekker) and everything goes through fsum, so
    merging duplicate rows into one weight leaves the total bit-identical."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    p = w * v
    wh, wl = _split(w)
    vh, vl = _split(v)
    err = ((wh * vh - p) + wh * vl + wl * vh) + wl * vl
    return math.fsum(np.concatenate([p, err]))


# --- parameter transforms ----------------------------------------------------


class _Layout:
    """Maps the free-parameter vector to natural parameters and back."""

    def __init__(self, spec: ModelSpec, n_cov: int, covariate_names: Sequence[str], fixed: Mapping[str, float]):
        self.spec = spec
        self.pos_names = spec.positive_names()
        self.beta_names = list(covariate_names) if spec.covariates else []
        known = set(self.pos_names) | set(self.beta_names)
        unknown = set(fixed) - known
        if unknown:
            raise ValueError(f"cannot fix {sorted(unknown)} in model {spec}; free parameters are {sorted(known)}")
        self.fixed = {k: float(v) for k, v in fixed.items()}
        for k in self.pos_names:
            if k in self.fixed and not self.fixed[k] > 0:
                raise ValueError(f"fixed {k} must be positive")
        self.free = [n for n in self.pos_names + self.beta_names if n not in self.fixed]

    def natural(self, theta: np.ndarray) -> dict:
        vals = dict(self.fixed)
        for name, v in zip(self.free, theta):
            vals[name] = math.exp(v) if name in self.pos_names else float(v)
        out = {n: vals[n] for n in self.pos_names}
        if self.spec.covariates:
            out["beta"] = [vals[n] for n in self.beta_names]
        return out

    def theta(self, params: Mapping) -> np.ndarray:
        flat = {n: params[n] for n in self.pos_names if n in params}
        for n, b in zip(self.beta_names, params.get("beta", ())):
            flat[n] = b
        return np.array([math.log(flat[n]) if n in self.pos_names else flat[n] for n in self.free], dtype=float)

    def is_log(self) -> np.ndarray:
        return np.array([n in self.pos_names for n in self.free], dtype=bool)


def start_values(dataset: CountDataset, spec: ModelSpec) -> dict:
    """Rate from the weighted mean count at c = 1; the gamma rate starts at 2
    with r = 2 * lambda0 so that r / alpha = lambda0; beta = 0."""
    w = dataset.weights
    mean_count = float(np.dot(w, dataset.counts) / w.sum())
    mean_t = float(np.dot(w, dataset.exposure) / w.sum())
    lam0 = max(mean_count, 0.05) / mean_t
    out: dict = {}
    if spec.heterogeneity:
        out.update(r=2.0 * lam0, alpha=2.0)
    else:
        out["lambda"] = lam0
    if spec.family == "weibull":
        out["c"] = 1.0
    if spec.covariates:
        out["beta"] = [0.0] * dataset.n_covariates
    return out


def embed(parent: FitResult, spec: ModelSpec, n_cov: int) -> dict:
    """Parameters of ``spec`` that reproduce (or, for heterogeneity, approach
    within the cap) the parent fit."""
    p = parent.params
    lam = p["lambda"] if "lambda" in p else p["r"] / p["alpha"]
    out: dict = {}
    if spec.heterogeneity:
        if "r" in p:
            out.update(r=p["r"], alpha=p["alpha"])
        else:
            # the homogeneous model is the r, alpha -> infinity limit
            big = math.exp(LOG_CAP)
            out.update(r=big * min(lam, 1.0), alpha=big / max(lam, 1.0))
    else:
        out["lambda"] = lam
    if spec.family == "weibull":
        out["c"] = p.get("c", 1.0)
    if spec.covariates:
        out["beta"] = list(p["beta"]) if "beta" in p else [0.0] * n_cov
    return out


# --- fitting -----------------------------------------------------------------

_EVAL_ERRORS = (SeriesConvergenceError, ResourceLimitError, FloatingPointError, OverflowError, ValueError)


def _objective(prep, spec, layout, tol, scale):
    is_log = layout.is_log()

    def f(theta):
        clipped = np.where(is_log, np.clip(theta, -LOG_CAP, LOG_CAP), theta)
        excess = float(np.sum((theta - clipped) ** 2))
        try:
            ll = log_likelihood(prep, spec, layout.natural(clipped), tol)
        except _EVAL_ERRORS:
            return math.inf
        if not math.isfinite(ll):
            return math.inf
        return -ll / scale + 1e3 * excess

    return f


def _quasi_newton(f, theta0, bounds, max_iter):
    lo_hi = [(-math.inf if lo is None else lo, math.inf if hi is None else hi) for lo, hi in bounds]
    start = np.array([min(max(v, lo), hi) for v, (lo, hi) in zip(theta0, lo_hi)])
    return minimize(f, start, method="L-BFGS-B", bounds=bounds,
                    options=dict(maxiter=max_iter, ftol=1e-15, gtol=1e-9))


def _run_local(f, theta0, options: FitOptions, bounds, optimizer: str) -> tuple[np.ndarray, float, bool, int]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if optimizer == "quasi-newton":
            try:
                q = _quasi_newton(f, theta0, bounds, options.max_iter)
            except _EVAL_ERRORS:
                return theta0, math.inf, False, 0
            return q.x, float(q.fun), bool(q.success) and math.isfinite(q.fun), int(q.nit)
        nm = minimize(f, theta0, method="Nelder-Mead",
                      options=dict(maxiter=options.max_iter, maxfev=2 * options.max_iter, xatol=options.xatol,
                                   fatol=options.fatol, adaptive=theta0.size > 2))
        theta, fun, ok, nit = nm.x, float(nm.fun), bool(nm.success), int(nm.nit)
        if options.refine and math.isfinite(fun):
            try:
                q = _quasi_newton(f, theta, bounds, 200)
                if math.isfinite(q.fun) and q.fun <= fun:
                    theta, fun, nit = q.x, float(q.fun), nit + int(q.nit)
                    ok = ok or bool(q.success)
            except _EVAL_ERRORS:
                pass
    return theta, fun, ok, nit


def _snap_to_boundary(f, layout: _Layout, theta: np.ndarray, fun: float, fatol: float) -> tuple[np.ndarray, float]:
    """Move a heterogeneity fit onto the homogeneous limit (r, alpha at the cap,
    same mean rate) when that point is no worse; flat likelihoods otherwise
    leave the simplex stranded at large but finite r."""
    if "r" not in layout.free or "alpha" not in layout.free:
        return theta, fun
    ir, ia = layout.free.index("r"), layout.free.index("alpha")
    d = theta[ir] - theta[ia]
    cand = theta.copy()
    cand[ir], cand[ia] = LOG_CAP + min(d, 0.0), LOG_CAP - max(d, 0.0)
    f_cand = f(cand)
    if f_cand <= fun + fatol:
        return cand, min(f_cand, fun)
    return theta, fun


def fit_mle(dataset: CountDataset, spec: ModelSpec, options: FitOptions | None = None,
            start: Mapping | None = None, extra_starts: Sequence[Mapping] = ()) -> FitResult:
    """Maximise the weighted likelihood from ``options.starts`` starting points.

    The first start is ``start`` (or the default start values); further starts
    jitter its log-scale coordinates with a generator seeded by ``options.seed``.
    ``extra_starts`` are tried in addition (used to warm-start from nested fits).
    """
    options = options or FitOptions()
    if len(dataset) == 0 or not dataset.weights.sum() > 0:
        raise ValueError("dataset must be nonempty with positive total weight")
    if spec.covariates and dataset.n_covariates == 0:
        raise ValueError(f"model {spec} needs covariates")
    layout = _Layout(spec, dataset.n_covariates, dataset.covariate_names, options.fixed)
    prep = prepare(dataset, spec, options.center)
    scale = float(dataset.weights.sum())
    f = _objective(prep, spec, layout, options.tol, scale)
    bounds = [(-LOG_CAP, LOG_CAP) if lg else (None, None) for lg in layout.is_log()]

    base = dict(start) if start is not None else start_values(dataset, spec)
    theta0 = layout.theta(base)
    rng = np.random.default_rng(np.random.SeedSequence([options.seed, spec.index]))
    starts = [theta0]
    for _ in range(max(options.starts, 1) - 1):
        jitter = rng.normal(0.0, options.jitter, size=theta0.size)
        starts.append(theta0 + jitter)
    starts += [layout.theta(s) for s in extra_starts]

    best = None
    total_iter = 0
    for th in starts:
        if not layout.free:
            theta, fun, ok, nit = th, f(th), True, 0
        else:
            theta, fun, ok, nit = _run_local(f, np.asarray(th, dtype=float), options, bounds, options.optimizer)
        total_iter += nit
        if best is None or fun < best[1]:
            best = (theta, fun, ok, nit)

    theta, fun, ok, _ = best
    if ok and spec.heterogeneity:
        theta, fun = _snap_to_boundary(f, layout, np.asarray(theta, dtype=float), fun, options.fatol)
    is_log = layout.is_log()
    theta = np.where(is_log, np.clip(theta, -LOG_CAP, LOG_CAP), theta)
    params = layout.natural(theta)
    diag: dict = {}
    try:
        ll = log_likelihood(prep, spec, params, options.tol, diagnostics=diag)
    except _EVAL_ERRORS as exc:
        ll, ok = -math.inf, False
        diag["error"] = str(exc)
    at_cap = [n for n, v, lg in zip(layout.free, theta, is_log) if lg and abs(v) >= LOG_CAP - 1e-3]
    diag.update(boundary=bool(at_cap), boundary_params=at_cap, starts=len(starts), fixed=dict(layout.fixed))
    if options.center and spec.covariates:
        diag["center"] = list(prep.center)
    return FitResult(spec, params, ll, bool(ok and math.isfinite(ll)), total_iter,
                     tuple(dataset.covariate_names) if spec.covariates else (), None, diag)


def fit_lattice(dataset: CountDataset, options: FitOptions | None = None,
                models: Sequence[int] = range(8)) -> dict[int, FitResult]:
    """Fit models in index order, warm-starting each from its fitted parents so
    that the nesting inequalities hold up to optimiser tolerance."""
    options = options or FitOptions()
    fits: dict[int, FitResult] = {}
    for k in sorted(models):
        spec = ModelSpec.from_index(k)
        if spec.covariates and dataset.n_covariates == 0:
            continue
        warm = [embed(fits[p.index], spec, dataset.n_covariates) for p in spec.parents() if p.index in fits]
        fits[k] = fit_mle(dataset, spec, options, extra_starts=warm)
    return fits


# --- bootstrap ---------------------------------------------------------------


@dataclass
class BootstrapResult:
    se: dict
    estimates: np.ndarray
    names: list[str]
    dropped: int
    replicates: int


def replicate_weights(n: int, seed: int, b: int) -> np.ndarray:
    """Multinomial resample counts for replicate ``b``; depends only on (seed, b)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
    return rng.multinomial(n, np.full(n, 1.0 / n)).astype(float)


def _replicate(args):
    dataset, spec, options, start, seed, b = args
    w = replicate_weights(len(dataset), seed, b)
    fit = fit_mle(dataset.with_weights(dataset.weights * w), spec, options, start=start)
    return fit.converged, fit.flat_params()


def bootstrap_se(dataset: CountDataset, spec: ModelSpec, B: int = 30, seed: int = 0,
                 options: FitOptions | None = None, base: FitResult | None = None,
                 workers: int = 1) -> BootstrapResult:
    """Weighted-likelihood bootstrap: each replicate reweights observations by
    their multinomial resample counts and refits from the base estimate.

    Standard errors are sample standard deviations (ddof=1) over the
    replicates that converged.
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    options = options or FitOptions()
    if base is None:
        base = fit_mle(dataset, spec, options)
    if not base.converged:
        raise SeriesConvergenceError("bootstrap needs a converged base fit")
    rep_options = replace(options, starts=1, optimizer=options.bootstrap_optimizer)
    jobs = [(dataset, spec, rep_options, base.params, seed, b) for b in range(B)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs))
    else:
        results = [_replicate(j) for j in jobs]
    names = [n for n in base.flat_params() if n not in options.fixed]
    kept = [[p[n] for n in names] for ok, p in results if ok]
    dropped = B - len(kept)
    if dropped > B / 2:
        raise SeriesConvergenceError(f"{dropped} of {B} bootstrap replicates failed to converge")
    est = np.array(kept, dtype=float).reshape(len(kept), len(names))
    sd = est.std(axis=0, ddof=1) if len(kept) > 1 else np.full(len(names), math.nan)
    return BootstrapResult(dict(zip(names, map(float, sd))), est, names, dropped, B)


# --- reporting ---------------------------------------------------------------


def likelihood_ratio_report(fits: Sequence[FitResult]) -> list[dict]:
    """Per model: parameter count, LL and LL gain over each fitted parent."""
    by_index = {f.model.index: f for f in fits}
    rows = []
    for k in sorted(by_index):
        fit = by_index[k]
        deltas = {p.index: fit.log_likelihood - by_index[p.index].log_likelihood
                  for p in fit.model.parents() if p.index in by_index}
        rows.append(dict(index=k, model=fit.model.name, n_params=fit.n_params,
                         log_likelihood=fit.log_likelihood, delta_vs_parents=deltas,
                         converged=fit.converged, boundary=fit.diagnostics.get("boundary", False)))
    return rows


def format_report(rows: Sequence[dict]) -> str:
    lines = [f"{'model':<24}{'k':>3}{'logL':>16}  gain over nested"]
    for row in rows:
        gains = ", ".join(f"[{p}] {d:+.4f}" for p, d in sorted(row["delta_vs_parents"].items())) or "-"
        flag = "" if row["converged"] else "  (not converged)"
        if row["boundary"]:
            flag += "  (boundary)"
        lines.append(f"[{row['index']}] {row['model']:<20}{row['n_params']:>3}{row['log_likelihood']:>16.4f}  {gains}{flag}")
    return "\n".join(lines)
