"""Weibull renewal count models with gamma heterogeneity and covariates."""
from .count_models import (
    DEFAULT_TOL,
    GammaMixParams,
    SeriesBatch,
    SeriesEval,
    WeibullCountParams,
    count_series,
    gamma_series,
    mixture_quadrature,
    moments_from_pmf,
    nbd_pmf,
    poisson_pmf,
    rate_for_mean,
    tilted_series,
    weibull_count_moments,
    weibull_count_pmf,
    weibull_count_pmf_table,
    weibull_gamma_moments,
    weibull_gamma_pmf,
    weibull_gamma_pmf_table,
)
from .data import ColumnBindings, CountDataset, DataError, dataset_to_csv, parse_dataset, parse_text, write_dataset
from .inference import (
    MODEL_NAMES,
    BootstrapResult,
    FitOptions,
    FitResult,
    ModelSpec,
    bootstrap_se,
    fit_lattice,
    fit_mle,
    format_report,
    likelihood_ratio_report,
    log_likelihood,
)
from .regression import (
    Observation,
    RegressionSpec,
    linear_predictor,
    weibull_gamma_regression_pmf,
    weibull_regression_pmf,
)
from .series import (
    AlphaTable,
    ResourceLimitError,
    SeriesConvergenceError,
    SignedLogValue,
    build_alpha_table,
    log_gamma,
    signed_log_sum,
)
from .simulation import Covariate, SimConfig, draw_interarrival, simulate_count, simulate_counts, simulate_dataset

__version__ = "0.1.0"
