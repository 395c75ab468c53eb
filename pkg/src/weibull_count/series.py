"""Log-space numerical primitives and the alpha coefficient table.

Every Weibull count probability is an alternating series whose terms span
hundreds of orders of magnitude, so terms are carried as (sign, log|x|) pairs
and accumulated by error-free pairwise summation after rescaling by the
largest magnitude.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import gammaln

EPS = float(np.finfo(float).eps)
J_CEILING = 512


class SeriesConvergenceError(ArithmeticError):
    """A series could not be summed to the requested accuracy."""


class ResourceLimitError(ValueError):
    """A requested table exceeds the configured size ceiling."""


def log_gamma(x):
    """ln Gamma(x) for x > 0 (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"log_gamma is defined for x > 0, got {x!r}")
    out = gammaln(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SignedLogValue:
    """(sign, ln|x|).  ``log_residual`` holds the rounding error of the stored
    logarithm so that encode/decode round-trips to a few ulps even where ln|x|
    is large; arithmetic only uses ``log_magnitude``."""

    sign: int
    log_magnitude: float = -math.inf
    log_residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")

    @classmethod
    def encode(cls, x: float) -> "SignedLogValue":
        if x == 0:
            return cls(0)
        a = abs(float(x))
        lg = math.log(a)
        return cls(1 if x > 0 else -1, lg, math.log1p(a / math.exp(lg) - 1.0))

    def decode(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude) * (1.0 + self.log_residual)

    def __float__(self) -> float:
        return self.decode()


ZERO = SignedLogValue(0)


def compensated_sum(x: np.ndarray) -> np.ndarray:
    """Cascaded pairwise summation along the last axis.

    Each pairwise addition is split exactly into sum and rounding error
    (Knuth's TwoSum); the errors are carried up the same tree and added back
    at the end, giving error ~ eps*|sum| + O(eps^2 log n) * sum|x|.  Trailing
    zeros leave the result bit-identical.
    """
    s = np.array(x, dtype=float)
    if s.shape[-1] == 0:
        return np.zeros(s.shape[:-1])
    e = np.zeros_like(s)
    while s.shape[-1] > 1:
        if s.shape[-1] % 2:
            pad = [(0, 0)] * (s.ndim - 1) + [(0, 1)]
            s = np.pad(s, pad)
            e = np.pad(e, pad)
        a, b = s[..., 0::2], s[..., 1::2]
        t = a + b
        bv = t - a
        err = (a - (t - bv)) + (b - bv)
        e = (e[..., 0::2] + e[..., 1::2]) + err
        s = t
    return s[..., 0] + e[..., 0]


def signed_log_accumulate(signs, logs):
    """Sum rows of signed log-magnitude terms.

    ``signs`` and ``logs`` broadcast to shape (..., n); entries with sign 0 or
    log -inf are ignored.  Returns ``(sign, log_magnitude, log_abs_total)``
    arrays over the leading axes, where ``log_abs_total`` is ln sum|term|.
    """
    signs = np.asarray(signs, dtype=float)
    logs = np.asarray(logs, dtype=float)
    signs, logs = np.broadcast_arrays(signs, logs)
    live = (signs != 0) & np.isfinite(logs)
    masked = np.where(live, logs, -np.inf)
    top = masked.max(axis=-1, initial=-np.inf) if masked.shape[-1] else np.full(masked.shape[:-1], -np.inf)
    shift = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        scaled = np.where(live, signs * np.exp(masked - shift[..., None]), 0.0)
    total = compensated_sum(scaled)
    abs_total = np.abs(scaled).sum(axis=-1)
    sign = np.sign(total).astype(int)
    with np.errstate(divide="ignore"):
        log_mag = np.where(sign != 0, np.log(np.abs(total)) + shift, -np.inf)
        log_abs = np.where(abs_total > 0, np.log(abs_total) + shift, -np.inf)
    return sign, log_mag, log_abs


def signed_log_sum(terms: Iterable[SignedLogValue]) -> SignedLogValue:
    terms = list(terms)
    if not terms:
        return ZERO
    signs = np.array([t.sign for t in terms], dtype=float)
    logs = np.array([t.log_magnitude if t.sign else -np.inf for t in terms])
    sign, log_mag, _ = signed_log_accumulate(signs, logs)
    s = int(sign)
    return SignedLogValue(s, float(log_mag)) if s else ZERO


@dataclass(frozen=True)
class AlphaTable:
    """Triangular table of ln alpha_j^i, rows i (count) by columns j (series index).

    Entries with j < i are -inf.  ``i_max`` may be smaller than ``j_max`` when
    only low counts are needed.
    """

    c: float
    j_max: int
    log_entries: np.ndarray

    @property
    def i_max(self) -> int:
        return self.log_entries.shape[0] - 1

    def log_alpha(self, i: int, j: int) -> float:
        if not (0 <= i <= j <= self.j_max) or i > self.i_max:
            raise IndexError(f"alpha_{j}^{i} outside table (i_max={self.i_max}, j_max={self.j_max})")
        return float(self.log_entries[i, j])

    def __getitem__(self, ij) -> SignedLogValue:
        i, j = ij
        return SignedLogValue(1, self.log_alpha(i, j))

    def alpha(self, i: int, j: int) -> float:
        return math.exp(self.log_alpha(i, j))

    def truncated(self, j_max: int, i_max: int) -> "AlphaTable":
        return AlphaTable(self.c, j_max, self.log_entries[: i_max + 1, : j_max + 1])


def _log_kernel(c: float, j_max: int) -> np.ndarray:
    # ln Gamma(ck+1) - ln Gamma(k+1), k = 0..j_max
    k = np.arange(j_max + 1, dtype=float)
    return gammaln(c * k + 1.0) - gammaln(k + 1.0)


def _compute_alpha(c: float, j_max: int, i_max: int) -> np.ndarray:
    g = _log_kernel(c, j_max)
    out = np.full((i_max + 1, j_max + 1), -np.inf)
    out[0] = g
    j = np.arange(j_max + 1)
    # lag[j, m] = ln G_{j-m} for m < j, else excluded
    lag = j[:, None] - j[None, :]
    lag_log = np.where(lag >= 1, g[np.clip(lag, 0, j_max)], -np.inf)
    for i in range(i_max):
        # alpha_j^{i+1} only involves j > i and m in [i, j-1]
        logs = out[i, i:j_max][None, :] + lag_log[i + 1:, i:j_max]
        sign, log_mag, _ = signed_log_accumulate(1.0, logs)
        out[i + 1, i + 1:] = np.where(sign > 0, log_mag, -np.inf)
    return out


_cache: "OrderedDict[float, AlphaTable]" = OrderedDict()
_cache_lock = threading.Lock()
_CACHE_SIZE = 64


def build_alpha_table(c: float, j_max: int, i_max: int | None = None, *, ceiling: int = J_CEILING) -> AlphaTable:
    """Return the alpha table for shape ``c`` covering j <= j_max and i <= i_max.

    Tables are cached per ``c``; a request that fits inside a cached table is
    served as a slice of it, and a larger request recomputes from scratch
    (entries depend only on their own (i, j) prefix, so existing values are
    reproduced bit for bit).
    """
    if not (c > 0 and math.isfinite(c)):
        raise ValueError(f"shape c must be positive and finite, got {c}")
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    if j_max > ceiling:
        raise ResourceLimitError(f"j_max={j_max} exceeds ceiling {ceiling}")
    i_max = j_max if i_max is None else min(int(i_max), j_max)
    key = float(c)
    with _cache_lock:
        hit = _cache.get(key)
        if hit is not None:
            _cache.move_to_end(key)
            if hit.j_max >= j_max and hit.i_max >= i_max:
                return hit.truncated(j_max, i_max)
            j_max_new = max(j_max, hit.j_max)
            i_max_new = max(i_max, hit.i_max)
        else:
            j_max_new, i_max_new = j_max, i_max
    table = AlphaTable(key, j_max_new, _compute_alpha(key, j_max_new, i_max_new))
    table.log_entries.setflags(write=False)
    with _cache_lock:
        _cache[key] = table
        _cache.move_to_end(key)
        while len(_cache) > _CACHE_SIZE:
            _cache.popitem(last=False)
    return table.truncated(j_max, i_max)


def clear_alpha_cache() -> None:
    with _cache_lock:
        _cache.clear()
