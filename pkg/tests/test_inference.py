import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from weibull_count.count_models import GammaMixParams, WeibullCountParams
from weibull_count.data import CountDataset
from weibull_count.inference import (
    MODEL_NAMES,
    FitOptions,
    ModelSpec,
    bootstrap_se,
    embed,
    exact_dot,
    fit_mle,
    format_report,
    likelihood_ratio_report,
    log_likelihood,
    replicate_weights,
    start_values,
)
from weibull_count.simulation import Covariate, SimConfig, simulate_dataset


@pytest.fixture(scope="module")
def wei_data():
    return simulate_dataset(SimConfig(WeibullCountParams(2.93, 1.5), n_draws=400, seed=4))


@pytest.fixture(scope="module")
def reg_data():
    cfg = SimConfig(WeibullCountParams(1.5, 1.2), n_draws=300, seed=8, beta=(0.4, -0.3),
                    covariates=(Covariate("x1", "normal", 2.0, 1.0), Covariate("x2", "bernoulli", 0.5)))
    return simulate_dataset(cfg)


# --- model lattice bookkeeping ------------------------------------------------------

def test_model_indices():
    expected = [("exponential", False, False), ("exponential", False, True), ("exponential", True, False),
                ("exponential", True, True), ("weibull", False, False), ("weibull", False, True),
                ("weibull", True, False), ("weibull", True, True)]
    for k, triple in enumerate(expected):
        spec = ModelSpec(*triple)
        assert spec.index == k and ModelSpec.from_index(k) == spec
        assert ModelSpec.from_name(MODEL_NAMES[k]) == spec
    assert [p.index for p in ModelSpec.from_index(7).parents()] == [3, 5, 6]
    with pytest.raises(ValueError):
        ModelSpec.from_name("gamma-count")
    with pytest.raises(ValueError):
        ModelSpec("lognormal")


# --- likelihood -----------------------------------------------------------------------

def test_single_observation_example():
    ds = CountDataset.from_arrays([0])
    ll = log_likelihood(ds, ModelSpec("weibull"), {"lambda": 1.7, "c": 2.3})
    assert ll == pytest.approx(-1.7, rel=1e-14)


def test_poisson_and_nbd_closed_forms(wei_data):
    ds = wei_data.with_weights(np.arange(len(wei_data)) % 3)
    ll0 = log_likelihood(ds, ModelSpec.from_index(0), {"lambda": 1.8})
    ref0 = math.fsum(ds.weights * stats.poisson.logpmf(ds.counts, 1.8))
    assert ll0 == pytest.approx(ref0, rel=1e-13)
    ll2 = log_likelihood(ds, ModelSpec.from_index(2), {"r": 3.0, "alpha": 1.5})
    ref2 = math.fsum(ds.weights * stats.nbinom.logpmf(ds.counts, 3.0, 1.5 / 2.5))
    assert ll2 == pytest.approx(ref2, rel=1e-12)


def test_weibull_at_c1_matches_poisson(wei_data):
    a = log_likelihood(wei_data, ModelSpec.from_index(4), {"lambda": 2.2, "c": 1.0})
    b = log_likelihood(wei_data, ModelSpec.from_index(0), {"lambda": 2.2})
    assert a == pytest.approx(b, rel=1e-12)
    a = log_likelihood(wei_data, ModelSpec.from_index(6), {"r": 2.0, "alpha": 0.8, "c": 1.0})
    b = log_likelihood(wei_data, ModelSpec.from_index(2), {"r": 2.0, "alpha": 0.8})
    assert a == pytest.approx(b, rel=1e-11)


def test_doubling_weights_doubles_ll(wei_data):
    p = {"r": 6.0, "alpha": 2.0, "c": 1.4}
    spec = ModelSpec.from_index(6)
    one = log_likelihood(wei_data, spec, p)
    two = log_likelihood(wei_data.with_weights(2 * wei_data.weights), spec, p)
    assert two == pytest.approx(2 * one, rel=1e-14)


def test_zero_weight_rows_not_evaluated():
    # a count of 5000 would exceed every series ceiling if it were evaluated
    ds = CountDataset.from_arrays([1, 2, 5000], weights=[1.0, 1.0, 0.0])
    ll = log_likelihood(ds, ModelSpec("weibull"), {"lambda": 1.2, "c": 1.3})
    assert math.isfinite(ll)


def test_floor_diagnostic():
    ds = CountDataset.from_arrays([150])
    diag = {}
    ll = log_likelihood(ds, ModelSpec.from_index(0), {"lambda": 0.01}, diagnostics=diag)
    assert ll == pytest.approx(math.log(1e-300)) and diag["floored"] == 1


@given(st.lists(st.tuples(st.integers(1, 6), st.floats(-700.0, 0.0)), min_size=1, max_size=40))
def test_exact_dot_merging(pairs):
    w, v = map(np.array, zip(*pairs))
    expanded = np.repeat(v, w.astype(int))
    assert exact_dot(w.astype(float), v) == math.fsum(expanded)


def test_regression_rate_absorption_in_likelihood(reg_data):
    beta = [0.35, -0.2]
    eta = reg_data.covariates @ np.array(beta)
    for k, base in ((5, {"lambda": 1.3, "c": 1.2}), (7, {"r": 3.0, "alpha": 2.0, "c": 0.9})):
        spec = ModelSpec.from_index(k)
        ll = log_likelihood(reg_data, spec, dict(base, beta=beta))
        parts = []
        for n in range(len(reg_data)):
            row = CountDataset.from_arrays([reg_data.counts[n]])
            if "lambda" in base:
                p = dict(lam=base["lambda"] * math.exp(eta[n]))
                parts.append(log_likelihood(row, ModelSpec.from_index(4), {"lambda": p["lam"], "c": base["c"]}))
            else:
                p = {"r": base["r"], "alpha": base["alpha"] * math.exp(-eta[n]), "c": base["c"]}
                parts.append(log_likelihood(row, ModelSpec.from_index(6), p))
        assert ll == pytest.approx(math.fsum(parts), rel=1e-12)


def test_beta_zero_collapses(reg_data):
    pairs = [(1, 0, {"lambda": 1.4}), (3, 2, {"r": 2.0, "alpha": 1.1}),
             (5, 4, {"lambda": 1.4, "c": 1.3}), (7, 6, {"r": 2.0, "alpha": 1.1, "c": 1.3})]
    for reg, base, p in pairs:
        a = log_likelihood(reg_data, ModelSpec.from_index(reg), dict(p, beta=[0.0, 0.0]))
        b = log_likelihood(reg_data, ModelSpec.from_index(base), p)
        assert a == b


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 5)), min_size=1, max_size=25),
       st.sampled_from([0, 2, 4, 6]), st.floats(0.6, 2.0))
def test_weighted_equals_expanded(rows, k, c):
    counts, w = map(list, zip(*rows))
    if sum(w) == 0:
        w[0] = 1
    ds = CountDataset.from_arrays(counts, weights=w)
    spec = ModelSpec.from_index(k)
    params = {"lambda": 1.7, "r": 2.5, "alpha": 1.3, "c": c}
    params = {n: params[n] for n in spec.positive_names()}
    a = log_likelihood(ds, spec, params)
    b = log_likelihood(ds.expanded(), spec, params)
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


# --- fitting ---------------------------------------------------------------------------

def test_poisson_mle_is_sample_mean():
    ds = CountDataset.from_arrays([0, 1, 2, 3, 4])
    fit = fit_mle(ds, ModelSpec.from_index(0))
    assert fit.converged and fit.params["lambda"] == pytest.approx(2.0, abs=1e-7)


def test_fixed_c_reproduces_poisson(wei_data):
    f0 = fit_mle(wei_data, ModelSpec.from_index(0))
    f4 = fit_mle(wei_data, ModelSpec.from_index(4), FitOptions(fixed={"c": 1.0}))
    assert f4.params["c"] == 1.0 and f4.diagnostics["fixed"] == {"c": 1.0}
    assert f4.params["lambda"] == pytest.approx(f0.params["lambda"], abs=1e-6)
    assert f4.n_params == 1
    with pytest.raises(ValueError):
        fit_mle(wei_data, ModelSpec.from_index(0), FitOptions(fixed={"c": 1.0}))


def test_weibull_fit_and_determinism(wei_data):
    opts = FitOptions(seed=3)
    a = fit_mle(wei_data, ModelSpec.from_index(4), opts)
    b = fit_mle(wei_data, ModelSpec.from_index(4), opts)
    assert a.converged and a.params == b.params and a.log_likelihood == b.log_likelihood
    assert a.params["lambda"] == pytest.approx(2.93, abs=0.45)
    assert a.params["c"] == pytest.approx(1.5, abs=0.25)
    f0 = fit_mle(wei_data, ModelSpec.from_index(0))
    assert a.log_likelihood - f0.log_likelihood > 2


def test_centering_leaves_fit_unchanged(reg_data):
    spec = ModelSpec.from_index(5)
    plain = fit_mle(reg_data, spec, FitOptions(optimizer="quasi-newton"))
    cent = fit_mle(reg_data, spec, FitOptions(optimizer="quasi-newton", center=True))
    assert cent.log_likelihood == pytest.approx(plain.log_likelihood, abs=1e-4)
    assert cent.params["beta"] == pytest.approx(plain.params["beta"], abs=1e-3)
    means = np.asarray(cent.diagnostics["center"])
    # lambda absorbs the shift of the covariates
    shifted = math.log(cent.params["lambda"]) - float(means @ np.asarray(cent.params["beta"]))
    assert shifted == pytest.approx(math.log(plain.params["lambda"]), abs=1e-3)


def test_start_values_and_embedding(wei_data):
    sv = start_values(wei_data, ModelSpec.from_index(6))
    assert sv["r"] / sv["alpha"] == pytest.approx(float(np.mean(wei_data.counts)))
    parent = fit_mle(wei_data, ModelSpec.from_index(4), FitOptions(optimizer="quasi-newton"))
    child = embed(parent, ModelSpec.from_index(6), 0)
    ll_child = log_likelihood(wei_data, ModelSpec.from_index(6), child)
    assert ll_child == pytest.approx(parent.log_likelihood, abs=1e-4)


def test_fit_argument_errors(wei_data):
    with pytest.raises(ValueError):
        fit_mle(wei_data, ModelSpec.from_index(5))
    with pytest.raises(ValueError):
        fit_mle(wei_data.with_weights(np.zeros(len(wei_data))), ModelSpec.from_index(0))
    with pytest.raises(ValueError):
        FitOptions(optimizer="newton")


# --- bootstrap ---------------------------------------------------------------------------

def test_replicate_weights_are_multinomial():
    w = replicate_weights(50, 9, 3)
    assert w.sum() == 50 and np.all(w >= 0)
    assert np.array_equal(w, replicate_weights(50, 9, 3))
    assert not np.array_equal(w, replicate_weights(50, 9, 4))


def test_bootstrap_identical_rows_zero_se():
    ds = CountDataset.from_arrays([2] * 40)
    res = bootstrap_se(ds, ModelSpec.from_index(0), B=5, seed=1)
    assert res.se["lambda"] == 0.0


def test_bootstrap_deterministic(wei_data):
    a = bootstrap_se(wei_data, ModelSpec.from_index(0), B=6, seed=11)
    b = bootstrap_se(wei_data, ModelSpec.from_index(0), B=6, seed=11)
    assert a.se == b.se and a.dropped == 0 and a.replicates == 6
    with pytest.raises(ValueError):
        bootstrap_se(wei_data, ModelSpec.from_index(0), B=1)


def test_bootstrap_poisson_se_matches_asymptotics():
    ds = simulate_dataset(SimConfig(WeibullCountParams(2.0, 1.0), n_draws=1000, seed=2))
    res = bootstrap_se(ds, ModelSpec.from_index(0), B=200, seed=5)
    assert res.se["lambda"] == pytest.approx(math.sqrt(2.0 / 1000), rel=0.3)


# --- reporting ---------------------------------------------------------------------------

def test_likelihood_ratio_report(wei_data):
    fits = [fit_mle(wei_data, ModelSpec.from_index(k), FitOptions(optimizer="quasi-newton")) for k in (0, 4)]
    rows = likelihood_ratio_report(fits)
    assert [r["index"] for r in rows] == [0, 4]
    assert rows[1]["delta_vs_parents"][0] == pytest.approx(fits[1].log_likelihood - fits[0].log_likelihood)
    assert rows[1]["n_params"] == 2
    text = format_report(rows)
    assert "[4] weibull" in text and "[0] +" in text


def test_flat_heterogeneity_snaps_to_cap():
    # on this sample the simplex stalls near r = 5e6 where the likelihood is flat
    ds = simulate_dataset(SimConfig(WeibullCountParams(2.93, 1.5), n_draws=1000, seed=108))
    opts = FitOptions(starts=1)
    f4 = fit_mle(ds, ModelSpec.from_index(4), opts)
    f6 = fit_mle(ds, ModelSpec.from_index(6), opts)
    assert f6.diagnostics["boundary"] and "r" in f6.diagnostics["boundary_params"]
    assert f6.params["r"] == pytest.approx(1e8)
    assert abs(f6.log_likelihood - f4.log_likelihood) < 1e-6
