import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weibull_count.count_models import (
    GammaMixParams,
    WeibullCountParams,
    nbd_pmf,
    weibull_count_moments,
    weibull_count_pmf_table,
)
from weibull_count.data import dataset_to_csv
from weibull_count.simulation import (
    BLOCK,
    Covariate,
    RunawayError,
    SimConfig,
    count_events,
    draw_interarrival,
    empirical_pmf,
    simulate_count,
    simulate_counts,
    simulate_dataset,
    summary,
)


def test_interarrival_examples():
    assert draw_interarrival(1.0, 1.0, 1 - math.exp(-1)) == pytest.approx(1.0, rel=1e-15)
    assert draw_interarrival(1.0, 2.0, 1 - math.exp(-4)) == pytest.approx(2.0, rel=1e-15)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_interarrival_scale(u, lam, k):
    assert draw_interarrival(k * lam, 1.0, u) == pytest.approx(draw_interarrival(lam, 1.0, u) / k, rel=1e-13)


def test_vanishing_rate_gives_zero():
    rng = np.random.default_rng(0)
    assert np.all(count_events(np.full(1000, 1e-12), 1.3, 1.0, rng) == 0)


def test_runaway_guard():
    with pytest.raises(RunawayError):
        count_events(np.array([1e4]), 1.0, 1.0, np.random.default_rng(0), max_events=100)


def test_poisson_mean():
    _, k = simulate_counts(SimConfig(WeibullCountParams(2.0, 1.0), n_draws=10**6, seed=1))
    assert abs(k.mean() - 2.0) < 0.005


@pytest.mark.parametrize("lam, c", [(2.93, 1.5), (1.39, 0.5)])
def test_moments_match_series(lam, c):
    n = 10**6
    _, k = simulate_counts(SimConfig(WeibullCountParams(lam, c), n_draws=n, seed=7))
    mean, var = weibull_count_moments(WeibullCountParams(lam, c), 1.0)
    assert abs(k.mean() - mean) < 4 * math.sqrt(var / n)
    m4 = np.mean((k - k.mean()) ** 4)
    assert abs(k.var(ddof=1) - var) < 4 * math.sqrt((m4 - var ** 2) / n)


def test_gamma_at_c1_matches_nbd():
    n = 10**6
    _, k = simulate_counts(SimConfig(GammaMixParams(2.0, 1.5, 1.0), n_draws=n, seed=3))
    freq = empirical_pmf(k, 10)
    p = nbd_pmf(2.0, 1.5, 1.0, np.arange(11))
    assert np.all(np.abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n))


def test_pmf_cells_within_binomial_band():
    n = 10**6
    _, k = simulate_counts(SimConfig(WeibullCountParams(2.93, 1.5), n_draws=n, seed=12))
    p = weibull_count_pmf_table(WeibullCountParams(2.93, 1.5), 1.0)[:9]
    freq = empirical_pmf(k, 8)
    assert np.all(np.abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n))


def test_block_streams_independent_of_split():
    cfg = SimConfig(WeibullCountParams(1.2, 0.8), n_draws=BLOCK + 100, seed=5)
    _, whole = simulate_counts(cfg)
    _, first = simulate_counts(SimConfig(cfg.params, n_draws=BLOCK, seed=5))
    assert np.array_equal(whole[:BLOCK], first)


def test_dataset_bytes_reproducible():
    cfg = SimConfig(GammaMixParams(5, 2.5, 1.3), n_draws=200, seed=3, beta=(0.3, -0.2),
                    covariates=(Covariate("x1", "normal", 0, 1), Covariate("x2", "bernoulli", 0.5)))
    a = dataset_to_csv(simulate_dataset(cfg))
    b = dataset_to_csv(simulate_dataset(cfg))
    assert a == b
    other = SimConfig(cfg.params, n_draws=200, seed=4, beta=cfg.beta, covariates=cfg.covariates)
    assert a != dataset_to_csv(simulate_dataset(other))
    ds = simulate_dataset(cfg, n=50)
    assert len(ds) == 50 and ds.covariate_names == ("x1", "x2")
    assert set(np.unique(ds.covariates[:, 1])) <= {0.0, 1.0}


def test_zero_beta_matches_homogeneous_marginal():
    n = 200_000
    base = WeibullCountParams(1.6, 1.4)
    _, k0 = simulate_counts(SimConfig(base, n_draws=n, seed=9, beta=(0.0,), covariates=(Covariate("z"),)))
    p = weibull_count_pmf_table(base, 1.0)[:7]
    freq = empirical_pmf(k0, 6)
    assert np.all(np.abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n))


def test_single_draw_api():
    rng = np.random.default_rng(0)
    cfg = SimConfig(GammaMixParams(3.0, 1.0, 1.2), beta=(0.1,), covariates=(Covariate("x", "uniform", 0, 1),))
    draws = [simulate_count(cfg, rng) for _ in range(2000)]
    assert all(isinstance(d, int) and d >= 0 for d in draws)
    assert summary(draws)["n"] == 2000


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(WeibullCountParams(1, 1), n_draws=0)
    with pytest.raises(ValueError):
        SimConfig(WeibullCountParams(1, 1), t=0.0)
    with pytest.raises(ValueError):
        SimConfig(WeibullCountParams(1, 1), beta=(1.0,))
    with pytest.raises(ValueError):
        Covariate("x", "poisson").draw(np.random.default_rng(0), 3)
