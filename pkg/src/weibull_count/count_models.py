"""Probability mass functions and moments for the Weibull count family.

The homogeneous model sums

    C_i(t) = sum_{j>=i} (-1)^(j+i) (lambda t^c)^j alpha_j^i / Gamma(cj+1)

and the gamma-mixed model replaces (lambda)^j by the j-th raw moment of a
Gamma(r, alpha) rate, Gamma(r+j) / (Gamma(r) alpha^j).  Both series are summed
in log space; see :func:`count_series` and :func:`gamma_series` for the
vectorised engines the likelihood code uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp, roots_genlaguerre

from . import precise
from .series import (
    EPS,
    J_CEILING,
    ResourceLimitError,
    SeriesConvergenceError,
    build_alpha_table,
    signed_log_accumulate,
)

DEFAULT_TOL = 1e-12
MAX_CANCELLATION = 1e12
# absolute accuracy below which a double-precision sum is accepted as is
ABS_ERR_FLOOR = 1e-12
STREAK = 3
I_CEILING = 1024

METHOD_SERIES = "series"
METHOD_EXTENDED = "series-extended"
METHOD_QUADRATURE = "quadrature"
METHOD_TILTED = "tilted"


@dataclass(frozen=True)
class WeibullCountParams:
    lam: float
    c: float

    def __post_init__(self):
        for name in ("lam", "c"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class GammaMixParams:
    r: float
    alpha: float
    c: float

    def __post_init__(self):
        for name in ("r", "alpha", "c"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class SeriesEval:
    value: float
    terms_used: int
    converged: bool
    cancellation_ratio: float
    error_bound: float = 0.0
    method: str = METHOD_SERIES

    def __float__(self):
        return self.value


@dataclass
class SeriesBatch:
    """Column-wise results of a vectorised series evaluation."""

    value: np.ndarray
    terms_used: np.ndarray
    converged: np.ndarray
    cancellation_ratio: np.ndarray
    error_bound: np.ndarray
    method: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "SeriesBatch":
        return cls(np.zeros(n), np.zeros(n, dtype=int), np.zeros(n, dtype=bool),
                   np.ones(n), np.zeros(n), np.full(n, METHOD_SERIES, dtype=object))

    def row(self, k: int) -> SeriesEval:
        return SeriesEval(float(self.value[k]), int(self.terms_used[k]), bool(self.converged[k]),
                          float(self.cancellation_ratio[k]), float(self.error_bound[k]),
                          str(self.method[k]))


def log_rising(r: float, n) -> np.ndarray:
    """ln(Gamma(r+n)/Gamma(r)) for integer n >= 0, accurate for very large r."""
    n = np.asarray(n, dtype=int)
    top = int(n.max(initial=0))
    if top <= 4096:
        cum = np.concatenate(([0.0], np.cumsum(np.log(r + np.arange(top)))))
        return cum[n]
    return gammaln(r + n) - gammaln(r)


def _initial_j(i: int, x_max: float) -> int:
    return min(J_CEILING, i + 24 + int(4.0 * x_max))


def _stop_index(log_t: np.ndarray, signs: np.ndarray, tol: float) -> np.ndarray:
    """Index (into the term axis) of the last included term, or -1 if the
    truncation rule is not met within the available terms."""
    top = log_t.max(axis=1, keepdims=True)
    partial = np.cumsum(signs * np.exp(log_t - top), axis=1)
    with np.errstate(divide="ignore"):
        log_s = np.log(np.abs(partial)) + top
    small = log_t <= math.log(tol) + log_s
    dec = np.zeros_like(small)
    dec[:, 1:] = log_t[:, 1:] < log_t[:, :-1]
    ok = small & dec
    run = ok.copy()
    for k in range(1, STREAK):
        run[:, k:] &= ok[:, :-k]
        run[:, :k] = False
    hit = run.any(axis=1)
    return np.where(hit, run.argmax(axis=1), -1)


def _alternating(c: float, counts: np.ndarray, log_x: np.ndarray, tol: float,
                 r: float | None, extended: bool, max_cancellation: float) -> tuple[SeriesBatch, np.ndarray]:
    """Shared engine.  Returns the batch and a mask of rows that failed
    (ceiling reached or cancellation beyond ``max_cancellation``)."""
    n = counts.size
    out = SeriesBatch.empty(n)
    failed = np.zeros(n, dtype=bool)
    if n == 0:
        return out, failed
    i_top = int(counts.max())
    if i_top > J_CEILING:
        raise ResourceLimitError(f"count {i_top} exceeds series ceiling {J_CEILING}")
    x_all = float(np.exp(log_x.max()))
    # one table size for the whole batch keeps the alpha cache from thrashing
    j_start = _initial_j(i_top, x_all if r is None else x_all * max(r, 1.0))
    for i in np.unique(counts):
        i = int(i)
        rows = np.flatnonzero(counts == i)
        lx = log_x[rows]
        j_hi = j_start
        pending = np.ones(rows.size, dtype=bool)
        while True:
            table = build_alpha_table(c, j_hi, i_top)
            j = np.arange(i, j_hi + 1)
            base = table.log_entries[i, i:j_hi + 1] - gammaln(c * j + 1.0)
            size = np.abs(table.log_entries[i, i:j_hi + 1]) + gammaln(c * j + 1.0)
            if r is not None:
                extra = log_rising(r, j)
                base = base + extra
                size = size + np.abs(extra)
            sel = np.flatnonzero(pending)
            log_t = j[None, :] * lx[sel, None] + base[None, :]
            signs = np.where((j - i) % 2 == 0, 1.0, -1.0)
            stop = _stop_index(log_t, signs[None, :], tol)
            done = stop >= 0
            if done.any():
                _finish(out, failed, rows[sel[done]], i, j, log_t[done], signs, stop[done],
                        size, lx[sel[done]], tol, c, r, extended, max_cancellation)
                pending[sel[done]] = False
            if not pending.any():
                break
            if j_hi >= J_CEILING:
                bad = rows[pending]
                failed[bad] = True
                out.terms_used[bad] = j_hi - i + 1
                out.value[bad] = np.nan
                break
            j_hi = min(J_CEILING, 2 * j_hi)
    return out, failed


def _finish(out, failed, rows, i, j, log_t, signs, stop, size, lx, tol, c, r, extended, max_cancellation):
    width = log_t.shape[1]
    keep = np.arange(width)[None, :] <= stop[:, None]
    sign, log_mag, log_abs = signed_log_accumulate(signs[None, :], np.where(keep, log_t, -np.inf))
    value = sign * np.exp(log_mag)
    with np.errstate(over="ignore"):
        ratio = np.where(sign != 0, np.exp(log_abs - log_mag), np.inf)
    nxt = np.minimum(stop + 1, width - 1)
    trunc = np.where(stop + 1 < width, np.exp(log_t[np.arange(len(stop)), nxt]), 0.0)
    # exp() amplifies the absolute error of each log-term argument
    arg = np.where(keep, np.abs(j[None, :] * lx[:, None]) + size[None, :], 0.0).max(axis=1)
    round_err = 4.0 * EPS * (1.0 + arg) * np.exp(log_abs) + 2.0 * EPS * np.abs(value)
    err = trunc + round_err
    method = np.full(len(rows), METHOD_SERIES, dtype=object)
    too_wide = ratio > max_cancellation
    want = extended & (err > np.maximum(tol * np.abs(value), ABS_ERR_FLOOR)) & ~too_wide
    todo = np.flatnonzero(want)
    if todo.size:
        need = 80 + np.maximum(0.0, (log_abs[todo] - np.log(np.maximum(np.abs(value[todo]), 1e-300))) / math.log(2))
        bits = int(need.max()) + int(math.log2(width + 1))
        j_stop = i + int(stop[todo].max())
        mid = rad = None
        for _ in range(5):
            mid, rad = precise.alternating_series_batch(c, i, lx[todo], j_stop, bits, r)
            short = rad > np.maximum(tol * np.abs(mid), ABS_ERR_FLOOR) * 1e-2
            if not short.any() or bits > 4000:
                break
            bits *= 2
        value[todo] = mid
        err[todo] = trunc[todo] + rad + EPS * np.abs(mid)
        with np.errstate(divide="ignore", over="ignore"):
            ratio[todo] = np.where(mid != 0, np.exp(log_abs[todo]) / np.abs(mid), np.inf)
        method[todo] = METHOD_EXTENDED
    converged = ~too_wide
    lo = value < 0
    hi = value > 1
    converged &= ~(lo & (value < -tol)) & ~(hi & (value > 1 + tol))
    value = np.clip(value, 0.0, 1.0)
    out.value[rows] = value
    out.terms_used[rows] = stop + 1
    out.converged[rows] = converged
    out.cancellation_ratio[rows] = np.maximum(ratio, 1.0)
    out.error_bound[rows] = err
    out.method[rows] = method
    failed[rows] = too_wide


def _check_tol(tol):
    if not (0 < tol <= 1e-4):
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol}")


def count_series(c: float, counts, log_u, tol: float = DEFAULT_TOL, *, extended: bool = True,
                 max_cancellation: float = MAX_CANCELLATION, fallback: bool = False) -> SeriesBatch:
    """Vectorised C_i at u = lambda t^c, given ``log_u`` per row.

    Rows the alternating series cannot sum raise, unless ``fallback`` routes
    them to :func:`tilted_series`.
    """
    _check_tol(tol)
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    log_u = np.broadcast_to(np.asarray(log_u, dtype=float), counts.shape).astype(float)
    out, failed = _alternating(float(c), counts, log_u, tol, None, extended, max_cancellation)
    if failed.any() and fallback:
        idx = np.flatnonzero(failed)
        q = tilted_series(float(c), counts[idx], log_u[idx], tol)
        for name in ("value", "terms_used", "converged", "cancellation_ratio", "error_bound", "method"):
            getattr(out, name)[idx] = getattr(q, name)
    elif failed.any():
        k = int(np.flatnonzero(failed)[0])
        raise SeriesConvergenceError(
            f"Weibull count series failed at i={counts[k]}, lambda*t^c={math.exp(log_u[k]):.6g} "
            f"(terms={out.terms_used[k]}, cancellation={out.cancellation_ratio[k]:.3g})")
    return out


def gamma_series(c: float, r: float, counts, log_x, tol: float = DEFAULT_TOL, *, extended: bool = True,
                 max_cancellation: float = MAX_CANCELLATION, fallback: bool = True) -> SeriesBatch:
    """Vectorised gamma-mixed pmf at x = t^c / alpha (times any rate multiplier).

    Rows whose series cannot be summed (including every x >= 1, where it
    diverges) are integrated over the rate instead: first term by term in the
    positive form of :func:`tilted_series`, then by quadrature if needed.
    """
    _check_tol(tol)
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    log_x = np.broadcast_to(np.asarray(log_x, dtype=float), counts.shape).astype(float)
    # the series diverges for x >= 1; those rows go straight to the positive form
    direct = log_x < 0
    out = SeriesBatch.empty(counts.size)
    failed = ~direct
    if direct.any():
        sub, sub_failed = _alternating(float(c), counts[direct], log_x[direct], tol, float(r),
                                       extended, max_cancellation)
        idx = np.flatnonzero(direct)
        for name in ("value", "terms_used", "converged", "cancellation_ratio", "error_bound", "method"):
            getattr(out, name)[idx] = getattr(sub, name)
        failed[idx] = sub_failed | ~sub.converged
    if failed.any():
        if not fallback:
            k = int(np.flatnonzero(failed)[0])
            raise SeriesConvergenceError(
                f"gamma-mixture series failed at i={counts[k]}, t^c/alpha={math.exp(log_x[k]):.6g}")
        idx = np.flatnonzero(failed)
        q = tilted_series(float(c), counts[idx], log_x[idx], tol, float(r))
        for name in ("value", "terms_used", "converged", "cancellation_ratio", "error_bound", "method"):
            getattr(out, name)[idx] = getattr(q, name)
    return out


def _positive_partial(log_t: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncation of a series of nonnegative terms: stop after STREAK
    consecutive non-increasing terms each below tol times the running sum.

    Returns (stop index or -1, ln of the partial sum at the stop, row shift)."""
    top = np.max(log_t, axis=1, initial=-np.inf)
    shift = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(invalid="ignore"):
        scaled = np.exp(log_t - shift[:, None])
    partial = np.cumsum(scaled, axis=1)
    small = (partial > 0) & (scaled <= tol * partial)
    flat = np.zeros_like(small)
    flat[:, 1:] = log_t[:, 1:] <= log_t[:, :-1]
    ok = small & flat
    run = ok.copy()
    for k in range(1, STREAK):
        run[:, k:] &= ok[:, :-k]
        run[:, :k] = False
    hit = run.any(axis=1)
    stop = np.where(hit, run.argmax(axis=1), -1)
    with np.errstate(divide="ignore"):
        log_sum = np.log(partial[np.arange(stop.size), np.maximum(stop, 0)]) + shift
    return stop, log_sum, shift


def tilted_series(c: float, counts, log_arg, tol: float = DEFAULT_TOL, r: float | None = None,
                  *, fallback: bool = True) -> SeriesBatch:
    """Positive-term form of either series.

    With b_n the Taylor coefficients of exp(kappa u) C_i(u) (all >= 0), the
    homogeneous pmf is exp(-kappa u) sum b_n u^n (``log_arg`` = ln u) and the
    gamma mixture integrates term by term to

        (1 + kappa x)^-r  sum_n b_n (r)_n (x / (1 + kappa x))^n

    (``log_arg`` = ln x, ``r`` given).  No cancellation occurs, and the mixture
    form converges for every x > 0.  Gamma rows that need more than the
    coefficient ceiling fall back to :func:`mixture_quadrature`.
    """
    _check_tol(tol)
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    log_arg = np.broadcast_to(np.asarray(log_arg, dtype=float), counts.shape).astype(float)
    out = SeriesBatch.empty(counts.size)
    out.method[:] = METHOD_TILTED
    failed = np.zeros(counts.size, dtype=bool)
    for i in np.unique(counts):
        i = int(i)
        if i > J_CEILING:
            raise ResourceLimitError(f"count {i} exceeds series ceiling {J_CEILING}")
        rows = np.flatnonzero(counts == i)
        kappa = precise.tilt_rate(c, i)
        la = log_arg[rows]
        if r is None:
            log_z = la
            log_pre = -kappa * np.exp(la)
        else:
            log_s = np.log1p(kappa * np.exp(la))
            log_z = la - log_s
            log_pre = -r * log_s
        n_hi = 64
        pending = np.ones(rows.size, dtype=bool)
        while True:
            log_b = precise.tilted_log_coefficients(c, i, n_hi)
            n = np.arange(n_hi + 1)
            base = log_b + (log_rising(r, n) if r is not None else 0.0)
            sel = np.flatnonzero(pending)
            with np.errstate(invalid="ignore"):
                log_t = base[None, :] + n[None, :] * log_z[sel, None]
            stop, log_sum, _ = _positive_partial(log_t, tol)
            done = stop >= 0
            if done.any():
                d = sel[done]
                lt = log_t[done]
                keep = n[None, :] <= stop[done][:, None]
                log_sum = log_sum[done]
                value = np.exp(log_pre[d] + log_sum)
                k = stop[done]
                last = lt[np.arange(k.size), k]
                prev = lt[np.arange(k.size), np.maximum(k - 1, 0)]
                with np.errstate(invalid="ignore"):
                    rho = np.where(np.isfinite(last) & (k > 0), np.exp(last - prev), 0.0)
                tail = np.where(rho < 1, np.exp(log_pre[d] + last) * rho / np.maximum(1 - rho, EPS), np.inf)
                arg = np.abs(log_pre[d]) + np.max(np.where(keep & np.isfinite(lt), np.abs(lt), 0.0), axis=1)
                err = tail + 4.0 * EPS * (1.0 + arg) * value
                idx = rows[d]
                out.value[idx] = np.minimum(value, 1.0)
                out.terms_used[idx] = k + 1
                out.converged[idx] = value <= 1.0 + tol
                out.error_bound[idx] = err
                pending[d] = False
            if not pending.any():
                break
            if n_hi >= J_CEILING:
                failed[rows[pending]] = True
                break
            n_hi = min(J_CEILING, 2 * n_hi)
    if failed.any():
        idx = np.flatnonzero(failed)
        if r is None or not fallback:
            k = int(idx[0])
            raise SeriesConvergenceError(
                f"positive-term series needs more than {J_CEILING} terms at i={counts[k]}, "
                f"argument {math.exp(log_arg[k]):.6g}")
        q = mixture_quadrature(float(c), float(r), counts[idx], log_arg[idx], tol)
        for name in ("value", "terms_used", "converged", "cancellation_ratio", "error_bound", "method"):
            getattr(out, name)[idx] = getattr(q, name)
    return out


@lru_cache(maxsize=256)
def _laguerre_rule(n: int, r: float) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_genlaguerre(n, r - 1.0)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights) - gammaln(r)
    return nodes, log_w


QUAD_ORDERS = (32, 64, 128, 256)


def mixture_quadrature(c: float, r: float, counts, log_x, tol: float = DEFAULT_TOL) -> SeriesBatch:
    """Integrate C_i(x g) against the Gamma(r, 1) density of g.

    The integrand is tilted by exp(kappa x g) so that what remains,
    exp(kappa u) C_i(u) = sum b_n u^n, has nonnegative coefficients; the
    Gamma weight absorbs the tilt and generalised Gauss-Laguerre rules of
    increasing order are compared until two agree.
    """
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    log_x = np.broadcast_to(np.asarray(log_x, dtype=float), counts.shape)
    out = SeriesBatch.empty(counts.size)
    out.method[:] = METHOD_QUADRATURE
    for i in np.unique(counts):
        i = int(i)
        rows = np.flatnonzero(counts == i)
        kappa = precise.tilt_rate(c, i)
        log_b = precise.tilted_log_coefficients(c, i)
        live = np.flatnonzero(np.isfinite(log_b))
        lb = log_b[live]
        m = live.astype(float)
        last = log_b.size - 1
        for k in rows:
            x = math.exp(log_x[k])
            s = 1.0 + kappa * x
            prev = None
            done = False
            for order in QUAD_ORDERS:
                nodes, log_w = _laguerre_rule(order, r)
                u = x * nodes / s
                log_u = np.log(u)
                terms = lb[None, :] + m[None, :] * log_u[:, None]
                log_f = logsumexp(terms, axis=1)
                # coefficients past n = last are bounded by (e kappa / n)^n, so the
                # dropped tail is at most a geometric series in e kappa u / last
                rho = math.e * kappa * u / last
                with np.errstate(divide="ignore", invalid="ignore"):
                    log_tail = np.where(rho < 1.0, last * np.log(rho) - np.log1p(-rho), np.inf)
                unresolved = log_tail - log_f > math.log(1e-3 * tol)
                contrib = log_w + log_f
                # exp(kappa u) C_i(u) <= exp(kappa u) bounds an unresolved node
                bound = log_w + kappa * u
                log_q = logsumexp(contrib[~unresolved]) if (~unresolved).any() else -np.inf
                slack = logsumexp(bound[unresolved]) if unresolved.any() else -np.inf
                q = math.exp(log_q - r * math.log(s))
                tail = math.exp(slack - r * math.log(s)) if np.isfinite(slack) else 0.0
                acc = max(tol * q, ABS_ERR_FLOOR)
                if prev is not None and tail <= acc and abs(q - prev) <= 10 * acc:
                    done = True
                    break
                prev = q
            out.value[k] = min(max(q, 0.0), 1.0)
            out.terms_used[k] = order
            out.converged[k] = done and q <= 1 + tol
            out.error_bound[k] = abs(q - prev) + tail if prev is not None else math.inf
            out.cancellation_ratio[k] = 1.0
            if not done:
                raise SeriesConvergenceError(
                    f"mixture quadrature did not converge at i={i}, t^c/alpha={x:.6g}, r={r:.6g} "
                    f"(coefficients up to n={last})")
    return out


# --- scalar API ------------------------------------------------------------


def weibull_count_pmf(params: WeibullCountParams, t: float, i: int, tol: float = DEFAULT_TOL) -> SeriesEval:
    if not t > 0:
        raise ValueError("t must be positive")
    if i < 0:
        raise ValueError("count must be >= 0")
    log_u = math.log(params.lam) + params.c * math.log(t)
    return count_series(params.c, [i], log_u, tol).row(0)


def weibull_gamma_pmf(params: GammaMixParams, t: float, i: int, tol: float = DEFAULT_TOL) -> SeriesEval:
    if not t > 0:
        raise ValueError("t must be positive")
    if i < 0:
        raise ValueError("count must be >= 0")
    log_x = params.c * math.log(t) - math.log(params.alpha)
    return gamma_series(params.c, params.r, [i], log_x, tol).row(0)


def poisson_pmf(lambda_t, i):
    lt = np.asarray(lambda_t, dtype=float)
    i = np.asarray(i)
    if np.any(~(lt > 0)):
        raise ValueError("lambda_t must be positive")
    out = np.exp(-lt + i * np.log(lt) - gammaln(i + 1.0))
    return float(out) if out.ndim == 0 else out


def log_nbd_pmf(r, alpha, t, i):
    r, alpha, t = (np.asarray(v, dtype=float) for v in (r, alpha, t))
    i = np.asarray(i)
    if np.ndim(r) == 0:
        lr = log_rising(float(r), i)
    else:
        lr = gammaln(r + i) - gammaln(r)
    return lr - gammaln(i + 1.0) - r * np.log1p(t / alpha) + i * (np.log(t) - np.log(alpha + t))


def nbd_pmf(r, alpha, t, i):
    for name, v in (("r", r), ("alpha", alpha), ("t", t)):
        if np.any(~(np.asarray(v) > 0)):
            raise ValueError(f"{name} must be positive")
    out = np.exp(log_nbd_pmf(r, alpha, t, i))
    return float(out) if np.ndim(out) == 0 else out


# --- moments ---------------------------------------------------------------


def _close_tail(batch_fn, tol: float, i_ceiling: int = I_CEILING, block: int = 16) -> np.ndarray:
    """Evaluate pmfs i = 0, 1, ... until the accumulated mass reaches 1 - tol."""
    probs: list[float] = []
    mass = 0.0
    i = 0
    limit = min(i_ceiling, J_CEILING)
    while i <= limit:
        ks = np.arange(i, min(i + block, limit + 1))
        vals = batch_fn(ks)
        for v in vals:
            probs.append(float(v))
            mass = math.fsum((mass, float(v)))
            if mass >= 1.0 - tol:
                return np.array(probs)
        i = ks[-1] + 1
        tail = np.array(probs[-STREAK:])
        mean = np.dot(np.arange(len(probs)), probs) / max(mass, 1e-300)
        if len(probs) > mean + 1 and np.all(tail <= 1e-3 * tol) and abs(1.0 - mass) <= 10 * tol:
            return np.array(probs)
    raise SeriesConvergenceError(f"tail mass failed to close: accumulated {mass!r} by i={i - 1}")


def moments_from_pmf(probs) -> tuple[float, float]:
    probs = np.asarray(probs, dtype=float)
    i = np.arange(probs.size, dtype=float)
    mean = math.fsum(i * probs)
    second = math.fsum(i * i * probs)
    return mean, max(second - mean * mean, 0.0)


def weibull_count_pmf_table(params: WeibullCountParams, t: float, tol: float = DEFAULT_TOL,
                            i_ceiling: int = I_CEILING) -> np.ndarray:
    log_u = math.log(params.lam) + params.c * math.log(t)

    def batch(ks):
        res = count_series(params.c, ks, log_u, tol, fallback=True)
        if not res.converged.all():
            raise SeriesConvergenceError(f"pmf out of range at i={ks[~res.converged][0]}")
        return res.value

    return _close_tail(batch, tol, i_ceiling)


def weibull_gamma_pmf_table(params: GammaMixParams, t: float, tol: float = DEFAULT_TOL,
                            i_ceiling: int = I_CEILING) -> np.ndarray:
    log_x = params.c * math.log(t) - math.log(params.alpha)

    def batch(ks):
        res = gamma_series(params.c, params.r, ks, log_x, tol)
        if not res.converged.all():
            raise SeriesConvergenceError(f"pmf out of range at i={ks[~res.converged][0]}")
        return res.value

    return _close_tail(batch, tol, i_ceiling)


def weibull_count_moments(params: WeibullCountParams, t: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    return moments_from_pmf(weibull_count_pmf_table(params, t, tol))


def weibull_gamma_moments(params: GammaMixParams, t: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    return moments_from_pmf(weibull_gamma_pmf_table(params, t, tol))


def rate_for_mean(c: float, mean: float, t: float = 1.0, tol: float = DEFAULT_TOL) -> float:
    """Weibull rate lambda whose count distribution at exposure t has the given mean."""
    def gap(log_lam):
        return weibull_count_moments(WeibullCountParams(math.exp(log_lam), c), t, tol)[0] - mean

    # renewal asymptote mean ~ t / E[Y] gives the starting guess; widen until bracketed
    guess = c * (math.log(mean / t) + math.lgamma(1.0 + 1.0 / c))
    lo, hi = guess - 0.5, guess + 0.5
    g_lo, g_hi = gap(lo), gap(hi)
    step = 0.5
    for _ in range(40):
        if g_lo <= 0 <= g_hi:
            break
        if g_lo > 0:
            hi, g_hi = lo, g_lo
            lo -= step
            g_lo = gap(lo)
        else:
            lo, g_lo = hi, g_hi
            hi += step
            g_hi = gap(hi)
        step *= 2
    else:
        raise ValueError(f"no rate found giving mean {mean} at c={c}")
    return math.exp(brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14))
