"""Parameter recovery with weighted-likelihood bootstrap standard errors.

Fits the Weibull count model to counts simulated at (lambda=2.93, c=1.5) and
the Weibull-gamma regression to data with two covariates, then reports each
estimate's distance from the truth in bootstrap standard errors.
"""

import argparse
import time

from weibull_count import GammaMixParams, WeibullCountParams
from weibull_count.inference import FitOptions, ModelSpec, bootstrap_se, fit_mle
from weibull_count.simulation import Covariate, SimConfig, simulate_dataset


def report(label, fit, boot, truth):
    print(f"{label}: log-likelihood {fit.log_likelihood:.4f}, converged {fit.converged}, "
          f"{boot.replicates - boot.dropped}/{boot.replicates} replicates")
    est = fit.flat_params()
    for name, true in truth.items():
        z = abs(est[name] - true) / boot.se[name]
        print(f"  {name:>6}: estimate {est[name]:.4f}  truth {true:.4f}  se {boot.se[name]:.4f}  |z| {z:.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--bootstrap", type=int, default=30)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    start = time.perf_counter()
    truth = WeibullCountParams(2.93, 1.5)
    ds = simulate_dataset(SimConfig(truth, n_draws=args.n, seed=args.seed))
    spec = ModelSpec("weibull")
    fit = fit_mle(ds, spec)
    boot = bootstrap_se(ds, spec, args.bootstrap, seed=1, base=fit, workers=args.workers)
    report("weibull", fit, boot, {"lambda": truth.lam, "c": truth.c})

    cfg = SimConfig(GammaMixParams(5.0, 2.5, 1.3), n_draws=args.n, seed=args.seed + 1, beta=(0.3, -0.2),
                    covariates=(Covariate("x1", "normal", 0, 1), Covariate("x2", "bernoulli", 0.5)))
    ds = simulate_dataset(cfg)
    spec = ModelSpec("weibull", heterogeneity=True, covariates=True)
    fit = fit_mle(ds, spec, FitOptions(starts=1))
    boot = bootstrap_se(ds, spec, args.bootstrap, seed=1, base=fit, workers=args.workers)
    report("weibull-gamma-reg", fit, boot, {"c": 1.3, "x1": 0.3, "x2": -0.2})
    print(f"elapsed {time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
