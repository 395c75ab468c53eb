"""Proportional-hazards covariates.

Covariates scale the Weibull rate, lambda_n = lambda * exp(x_n' beta), so in
both series the j-th term picks up exp(j x_n' beta).  That is the same as
shifting ln(lambda t^c) (or ln(t^c / alpha)) by the linear predictor, which is
how the vectorised engines are driven.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .count_models import (
    DEFAULT_TOL,
    GammaMixParams,
    SeriesEval,
    WeibullCountParams,
    count_series,
    gamma_series,
)


@dataclass(frozen=True)
class RegressionSpec:
    covariate_names: tuple[str, ...] = ()
    center_covariates: bool = False

    def __post_init__(self):
        names = tuple(self.covariate_names)
        if len(set(names)) != len(names):
            raise ValueError(f"covariate names must be unique, got {names}")
        object.__setattr__(self, "covariate_names", names)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)


@dataclass(frozen=True)
class Observation:
    count: int
    covariates: tuple[float, ...] = ()
    exposure_t: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 0:
            raise ValueError(f"count must be a nonnegative integer, got {self.count!r}")
        if not (self.exposure_t > 0 and math.isfinite(self.exposure_t)):
            raise ValueError(f"exposure must be positive and finite, got {self.exposure_t!r}")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ValueError(f"weight must be finite and >= 0, got {self.weight!r}")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "covariates", tuple(float(v) for v in self.covariates))


def weighted_means(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Column means of ``x`` under ``weights`` (used for centering)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise ValueError("centering needs positive total weight")
    return (w[:, None] * x).sum(axis=0) / total


def linear_predictor(obs: Observation, beta: Sequence[float], center: Sequence[float] | None = None) -> float:
    """x'beta, with x replaced by x - center when centering is on."""
    x = np.asarray(obs.covariates, dtype=float)
    b = np.asarray(beta, dtype=float)
    if x.shape != b.shape:
        raise ValueError(f"covariate vector has length {x.size} but beta has length {b.size}")
    if center is not None:
        m = np.asarray(center, dtype=float)
        if m.shape != x.shape:
            raise ValueError(f"centering vector has length {m.size}, expected {x.size}")
        x = x - m
    return float(math.fsum(x * b))


def linear_predictors(x: np.ndarray, beta: Sequence[float], center: Sequence[float] | None = None) -> np.ndarray:
    """Row-wise x'beta for an (n, P) covariate matrix."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(beta, dtype=float)
    if x.ndim != 2 or x.shape[1] != b.size:
        raise ValueError(f"covariates of shape {x.shape} do not match beta of length {b.size}")
    if center is not None:
        x = x - np.asarray(center, dtype=float)[None, :]
    if b.size == 0:
        return np.zeros(x.shape[0])
    return x @ b


def weibull_regression_pmf(params: WeibullCountParams, beta, obs: Observation, tol: float = DEFAULT_TOL,
                           center=None) -> SeriesEval:
    eta = linear_predictor(obs, beta, center)
    log_u = math.log(params.lam) + eta + params.c * math.log(obs.exposure_t)
    return count_series(params.c, [obs.count], log_u, tol).row(0)


def weibull_gamma_regression_pmf(params: GammaMixParams, beta, obs: Observation, tol: float = DEFAULT_TOL,
                                 center=None) -> SeriesEval:
    eta = linear_predictor(obs, beta, center)
    log_x = eta + params.c * math.log(obs.exposure_t) - math.log(params.alpha)
    return gamma_series(params.c, params.r, [obs.count], log_x, tol).row(0)
