"""Monte Carlo renewal-process oracle.

Spells are drawn by inverse transform from F(y) = 1 - exp(-lambda y^c), the
clock starting at an event, and a draw's count is the number of completed
spells by time t.  Random numbers come in fixed blocks of draws, each block
seeded from (seed, block index), so results do not depend on how the work is
split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .count_models import GammaMixParams, WeibullCountParams
from .data import CountDataset

BLOCK = 1 << 16
MAX_EVENTS = 10**6


class RunawayError(RuntimeError):
    """A single draw produced more events than the guard allows."""


def draw_interarrival(lambda_eff, c, u):
    """Inverse-cdf Weibull spell: (-ln(1-u) / lambda)^(1/c)."""
    return (-np.log1p(-np.asarray(u, dtype=float)) / lambda_eff) ** (1.0 / c)


@dataclass(frozen=True)
class Covariate:
    name: str
    kind: str = "normal"
    a: float = 0.0
    b: float = 1.0

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.a, self.b, size=n)
        if self.kind == "bernoulli":
            return (rng.random(n) < self.a).astype(float)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=n)
        raise ValueError(f"unknown covariate kind {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    params: WeibullCountParams | GammaMixParams
    t: float = 1.0
    n_draws: int = 1
    seed: int = 0
    beta: tuple[float, ...] = ()
    covariates: tuple[Covariate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValueError("t must be positive")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if len(self.beta) != len(self.covariates):
            raise ValueError(f"{len(self.beta)} coefficients for {len(self.covariates)} covariates")

    @property
    def heterogeneous(self) -> bool:
        return isinstance(self.params, GammaMixParams)


def count_events(rates: np.ndarray, c: float, t: float, rng: np.random.Generator,
                 max_events: int = MAX_EVENTS) -> np.ndarray:
    """Number of renewals in [0, t] for each rate, vectorised over draws."""
    rates = np.asarray(rates, dtype=float)
    counts = np.zeros(rates.size, dtype=np.int64)
    clock = np.zeros(rates.size)
    live = np.arange(rates.size)
    while live.size:
        clock[live] += draw_interarrival(rates[live], c, rng.random(live.size))
        inside = clock[live] <= t
        counts[live[inside]] += 1
        live = live[inside]
        if live.size and counts[live].max() > max_events:
            raise RunawayError(f"more than {max_events} events in one draw (rate {rates[live].max():.4g})")
    return counts


def _block(config: SimConfig, k: int, n: int):
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, k]))
    x = np.column_stack([cv.draw(rng, n) for cv in config.covariates]) if config.covariates else np.zeros((n, 0))
    p = config.params
    if config.heterogeneous:
        rates = rng.gamma(p.r, 1.0 / p.alpha, size=n)
    else:
        rates = np.full(n, p.lam)
    if config.beta:
        rates = rates * np.exp(x @ np.asarray(config.beta))
    return x, count_events(rates, p.c, config.t, rng)


def simulate_counts(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """All ``n_draws`` counts and their covariate rows."""
    xs, ks = [], []
    for k, start in enumerate(range(0, config.n_draws, BLOCK)):
        x, counts = _block(config, k, min(BLOCK, config.n_draws - start))
        xs.append(x)
        ks.append(counts)
    return np.concatenate(xs), np.concatenate(ks)


def simulate_count(config: SimConfig, rng: np.random.Generator) -> int:
    """One draw using the caller's generator (heterogeneity and covariates included)."""
    p = config.params
    x = np.array([cv.draw(rng, 1)[0] for cv in config.covariates])
    rate = rng.gamma(p.r, 1.0 / p.alpha) if config.heterogeneous else p.lam
    if config.beta:
        rate *= math.exp(float(x @ np.asarray(config.beta)))
    return int(count_events(np.array([rate]), p.c, config.t, rng)[0])


def simulate_dataset(config: SimConfig, n: int | None = None) -> CountDataset:
    if n is not None:
        config = SimConfig(config.params, config.t, n, config.seed, config.beta, config.covariates)
    x, counts = simulate_counts(config)
    names = tuple(cv.name for cv in config.covariates)
    return CountDataset(counts, x, config.t, 1.0, names, source_path=f"<simulated seed={config.seed}>")


def empirical_pmf(counts: np.ndarray, i_max: int | None = None) -> np.ndarray:
    counts = np.asarray(counts)
    size = int(counts.max()) + 1 if i_max is None else i_max + 1
    return np.bincount(np.minimum(counts, size), minlength=size + 1)[:size] / counts.size


def summary(counts: Sequence[int]) -> dict:
    counts = np.asarray(counts, dtype=float)
    return dict(n=int(counts.size), mean=float(counts.mean()), variance=float(counts.var(ddof=1)) if counts.size > 1 else 0.0)
