"""Ball-arithmetic (Arb) evaluation of the count series.

Used when the double-precision sum loses too many digits to cancellation, and
to build the exponentially tilted coefficients that keep the gamma-mixture
quadrature stable at large rates.  Every result carries a rigorous radius.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from contextlib import contextmanager
from functools import lru_cache

import numpy as np
from flint import arb, arb_poly, arb_series, ctx

from .series import J_CEILING, ResourceLimitError

_lock = threading.RLock()


@contextmanager
def working_precision(bits: int):
    # flint's context is process-global
    with _lock:
        old = ctx.prec
        ctx.prec = int(bits)
        try:
            yield
        finally:
            ctx.prec = old


def _prec_bucket(bits: int) -> int:
    return 1 << max(7, math.ceil(math.log2(bits)))


class _CoefTable:
    """Rows a^i for one (c, precision, length), extended one count at a time."""

    def __init__(self, c: float, bits: int, n: int):
        self.bits, self.n = bits, n
        cc = arb(float(c))
        gam = [(cc * k + 1).gamma() for k in range(n)]
        self.inv = [1 / v for v in gam]
        fact = arb(1)
        g = []
        for k in range(n):
            if k:
                fact = fact * k
            g.append(gam[k] / fact)
        self.kernel = arb_series([arb(0)] + g[1:], prec=n)
        self.row = arb_series(g, prec=n)
        self.rows: list[list] = []

    def extend(self, i_max: int) -> list[list]:
        # alpha^{i+1}(z) = alpha^i(z) (G(z) - 1) truncated at z^(n-1); series
        # products truncate at ctx.cap, which is process-global like ctx.prec
        old_prec, old_cap = ctx.prec, ctx.cap
        ctx.prec, ctx.cap = self.bits, self.n
        try:
            while len(self.rows) <= i_max:
                if self.rows:
                    self.row = self.row * self.kernel
                coeffs = self.row.coeffs()[: self.n]
                coeffs += [arb(0)] * (self.n - len(coeffs))
                self.rows.append([a * w for a, w in zip(coeffs, self.inv)])
        finally:
            ctx.prec, ctx.cap = old_prec, old_cap
        return self.rows


_coef_cache: "OrderedDict[tuple[float, int], _CoefTable]" = OrderedDict()


def series_coefficients(c: float, j_max: int, i_max: int, bits: int) -> list[list]:
    """Rows i of a_j^i = alpha_j^i / Gamma(cj+1) as Arb balls, j = 0..j_max
    (rows may be longer and more precise than requested).

    Must be called while holding ``working_precision(bits)``.
    """
    if j_max > J_CEILING:
        raise ResourceLimitError(f"j_max={j_max} exceeds ceiling {J_CEILING}")
    i_max = min(i_max, j_max)
    # a table built at higher precision serves lower-precision requests
    for key, table in reversed(_coef_cache.items()):
        if key[0] == float(c) and table.bits >= bits and table.n > j_max:
            _coef_cache.move_to_end(key)
            return table.extend(i_max)
    old = _coef_cache.get((float(c), bits))
    if old is not None:
        # grow geometrically so that walking up the counts rebuilds rarely
        j_max = min(J_CEILING, max(j_max, 2 * (old.n - 1)))
        i_max = max(i_max, len(old.rows) - 1)
    table = _CoefTable(c, bits, j_max + 1)
    _coef_cache[(float(c), bits)] = table
    _coef_cache.move_to_end((float(c), bits))
    while len(_coef_cache) > 16:
        _coef_cache.popitem(last=False)
    return table.extend(i_max)


def alternating_series(c: float, i: int, log_x: float, j_stop: int, bits: int,
                       gamma_shape: float | None = None) -> tuple[float, float]:
    """Sum_{j=i}^{j_stop} (-1)^(j+i) a_j^i x^j [Gamma(r+j)/Gamma(r)] in Arb.

    ``x = exp(log_x)``; the bracketed gamma moment factor is included when
    ``gamma_shape`` (r) is given.  Returns (midpoint, radius) as floats.
    """
    with working_precision(_prec_bucket(bits)):
        rows = series_coefficients(c, j_stop, i, _prec_bucket(bits))
        coef = rows[i]
        x = arb(log_x).exp()
        power = x ** i
        moment = arb(1)
        if gamma_shape is not None:
            moment = arb(float(gamma_shape)).rising(i)
        total = arb(0)
        for j in range(i, j_stop + 1):
            term = coef[j] * power * moment
            total = total + term if (j - i) % 2 == 0 else total - term
            power = power * x
            if gamma_shape is not None:
                moment = moment * (arb(float(gamma_shape)) + j)
        return float(total.mid()), float(total.rad())


_poly_cache: "OrderedDict[tuple, arb_poly]" = OrderedDict()


def _signed_poly(c: float, i: int, j_stop: int, bits: int, gamma_shape: float | None) -> arb_poly:
    key = (float(c), i, j_stop, bits, gamma_shape)
    hit = _poly_cache.get(key)
    if hit is not None:
        _poly_cache.move_to_end(key)
        return hit
    coef = series_coefficients(c, j_stop, i, bits)[i]
    terms = [arb(0)] * i
    moment = arb(1) if gamma_shape is None else arb(float(gamma_shape)).rising(i)
    for j in range(i, j_stop + 1):
        term = coef[j] * moment
        terms.append(term if (j - i) % 2 == 0 else -term)
        if gamma_shape is not None:
            moment = moment * (arb(float(gamma_shape)) + j)
    poly = arb_poly(terms)
    _poly_cache[key] = poly
    while len(_poly_cache) > 64:
        _poly_cache.popitem(last=False)
    return poly


def alternating_series_batch(c: float, i: int, log_x, j_stop: int, bits: int,
                             gamma_shape: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`alternating_series` over several ``log_x`` sharing one
    polynomial (terms j = i..j_stop)."""
    log_x = np.atleast_1d(np.asarray(log_x, dtype=float))
    mids = np.empty(log_x.size)
    rads = np.empty(log_x.size)
    bucket = _prec_bucket(bits)
    with working_precision(bucket):
        poly = _signed_poly(c, i, j_stop, bucket, gamma_shape)
        for k, lx in enumerate(log_x):
            v = poly(arb(float(lx)).exp())
            mids[k] = float(v.mid())
            rads[k] = float(v.rad())
    return mids, rads


def tilt_rate(c: float, i: int) -> float:
    """Smallest kappa with kappa >= S for every split of [0, 1] into i+1 pieces,
    S = sum of piece^c.  Then exp(kappa*u) * C_i(u) has nonnegative Taylor
    coefficients in u = lambda t^c."""
    return 1.0 if c >= 1 else float((i + 1) ** (1.0 - c))


_tilt_cache: "OrderedDict[tuple[float, int], np.ndarray]" = OrderedDict()
_tilt_lock = threading.Lock()


def tilted_log_coefficients(c: float, i: int, n_max: int = J_CEILING) -> np.ndarray:
    """ln b_n for exp(kappa u) C_i(u) = sum_n b_n u^n, n = 0..n_max.

    Zero coefficients (certified to be negligible against the bound
    b_n <= (e kappa / n)^n) are returned as -inf.  Rows are cached per (c, i)
    at the largest length requested so far.
    """
    if n_max > J_CEILING:
        raise ResourceLimitError(f"n_max={n_max} exceeds ceiling {J_CEILING}")
    key = (float(c), int(i))
    with _tilt_lock:
        hit = _tilt_cache.get(key)
        if hit is not None and hit.size > n_max:
            _tilt_cache.move_to_end(key)
            return hit[: n_max + 1]
    size = min(J_CEILING, max(64, 1 << math.ceil(math.log2(n_max + 1))))
    out = _tilted(float(c), int(i), size)
    out.setflags(write=False)
    with _tilt_lock:
        _tilt_cache[key] = out
        _tilt_cache.move_to_end(key)
        while len(_tilt_cache) > 1024:
            _tilt_cache.popitem(last=False)
    return out[: n_max + 1]


def _truncated_product(coeffs: list, series: arb_series, n: int) -> list:
    old_cap = ctx.cap
    ctx.cap = n
    try:
        return (arb_series(coeffs, prec=n) * series).coeffs()[:n]
    finally:
        ctx.cap = old_cap


@lru_cache(maxsize=64)
def _exp_poly(kappa: float, n_max: int, bits: int) -> arb_series:
    # Taylor polynomial of exp(kappa u); the caller holds working_precision(bits)
    k = arb(kappa)
    expo = [arb(1)]
    for m in range(1, n_max + 1):
        expo.append(expo[-1] * k / m)
    return arb_series(expo, prec=n_max + 1)


def _tilted(c: float, i: int, n_max: int) -> np.ndarray:
    kappa = tilt_rate(c, i)
    n = np.arange(n_max + 1)
    # scale of the Cauchy bound kappa^n / n!, used to certify near-zero entries
    log_scale = n * math.log(kappa) - np.array([math.lgamma(k + 1) for k in n])
    bits = 128 + int(n_max * math.log2(2.0 + kappa))
    while True:
        bucket = _prec_bucket(bits)
        with working_precision(bucket):
            rows = series_coefficients(c, n_max, i, bucket)
            signed = [arb(0)] * i + [rows[i][j] if (j - i) % 2 == 0 else -rows[i][j]
                                     for j in range(i, n_max + 1)]
            prod = _truncated_product(signed, _exp_poly(kappa, n_max, bucket), n_max + 1)
            prod += [arb(0)] * (n_max + 1 - len(prod))
            mids = np.array([float(b.mid()) for b in prod])
            rads = np.array([float(b.rad()) for b in prod])
        with np.errstate(divide="ignore"):
            log_rad = np.log(rads)
            log_mid = np.log(np.abs(mids))
        resolved = (rads <= 2.0 ** -50 * np.abs(mids)) & (mids > 0)
        negligible = log_rad <= log_scale - 100 * math.log(2)
        if np.all(resolved | negligible):
            break
        bits = 2 * bucket
        if bits > 1 << 16:
            raise ResourceLimitError("tilted coefficients need more than 65536 bits")
    return np.where(resolved, log_mid, -np.inf)
