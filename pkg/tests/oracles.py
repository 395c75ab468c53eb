"""Reference computations that share no code with the package.

* ``mp_alpha``: the alpha recursion in exact-ish mpmath arithmetic.
* ``mp_count_pmf``: the alternating count series at 80 significant digits.
* ``convolution_pmf``: F_i(t) - F_{i+1}(t) from nested adaptive quadrature of
  the renewal convolution, written in probability coordinates p = F(s) so the
  integrand stays bounded for c < 1.
* ``mixture_pmf``: adaptive quadrature over the gamma-distributed rate.
"""
from __future__ import annotations

import math
from functools import lru_cache

import mpmath as mp
from scipy import integrate

DPS = 80


@lru_cache(maxsize=None)
def mp_alpha(c: str, i_max: int, j_max: int):
    """alpha_j^i for i <= i_max, j <= j_max; ``c`` is passed as a decimal string."""
    with mp.workdps(DPS):
        cc = mp.mpf(c)
        g = [mp.gamma(cc * k + 1) / mp.factorial(k) for k in range(j_max + 1)]
        rows = [list(g)]
        for i in range(i_max):
            prev = rows[-1]
            row = [mp.mpf(0)] * (j_max + 1)
            for j in range(i + 1, j_max + 1):
                row[j] = mp.fsum(prev[m] * g[j - m] for m in range(i, j))
            rows.append(row)
        return rows


def mp_count_pmf(lam: float, c: float, t: float, i: int, j_max: int = 300) -> float:
    with mp.workdps(DPS):
        alpha = mp_alpha(repr(c), i, j_max)[i]
        u = mp.mpf(lam) * mp.mpf(t) ** mp.mpf(c)
        cc = mp.mpf(repr(c))
        s = mp.fsum((-1) ** (j + i) * u ** j * alpha[j] / mp.gamma(cc * j + 1) for j in range(i, j_max + 1))
        return float(s)


def _quantile(lam: float, c: float, p: float) -> float:
    return (-math.log1p(-p) / lam) ** (1.0 / c)


def convolution_cdf(lam: float, c: float, t: float, k: int) -> float:
    """P(Y_1 + ... + Y_k <= t) for iid Weibull spells."""
    if t <= 0:
        return 0.0
    f1 = -math.expm1(-lam * t ** c)
    if k == 1:
        return f1
    val, _ = integrate.quad(lambda p: convolution_cdf(lam, c, t - _quantile(lam, c, p), k - 1),
                            0.0, f1, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def convolution_pmf(lam: float, c: float, t: float, i: int) -> float:
    lower = 1.0 if i == 0 else convolution_cdf(lam, c, t, i)
    return lower - convolution_cdf(lam, c, t, i + 1)


def mixture_pmf(r: float, alpha: float, c: float, t: float, i: int) -> float:
    """Integral over lambda of the count pmf against Gamma(r, rate alpha)."""
    with mp.workdps(30):
        rr, aa = mp.mpf(r), mp.mpf(alpha)

        def integrand(lam):
            dens = aa ** rr * lam ** (rr - 1) * mp.exp(-aa * lam) / mp.gamma(rr)
            return dens * mp_count_pmf(float(lam), c, t, i, j_max=220)

        hi = float((r + 40 * math.sqrt(r)) / alpha)
        return float(mp.quad(integrand, mp.linspace(0, hi, 8)))
