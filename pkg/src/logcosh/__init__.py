"""Robust location, regression and quantile estimation built around the log-cosh loss."""

from .distributions import UNDEFINED, DistSpec, Kind, LocationScale, Moments, cdf, fisher_information, inv_cdf, kappa, moments, pdf, sample
from .losses import LossKind, LossSpec, psi, psi_prime, rank_objective, rho, stable_logcosh
from .solvers import (
    ConvergenceError,
    FitResult,
    MonotonicityReport,
    QuantileFit,
    RegressionData,
    SingularDesignError,
    fit_linear,
    fit_location,
    fit_location_scale,
    fit_quantiles,
    monotonicity_audit,
)
from .inference import BootstrapReport, GofReport, bootstrap_se, confidence_interval, ks_test, parametric_bootstrap
from .datasets import DataError, NamedDataset, builtin, load_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "UNDEFINED",
    "DistSpec",
    "Kind",
    "LocationScale",
    "Moments",
    "cdf",
    "fisher_information",
    "inv_cdf",
    "kappa",
    "moments",
    "pdf",
    "sample",
    "LossKind",
    "LossSpec",
    "psi",
    "psi_prime",
    "rank_objective",
    "rho",
    "stable_logcosh",
    "ConvergenceError",
    "FitResult",
    "MonotonicityReport",
    "QuantileFit",
    "RegressionData",
    "SingularDesignError",
    "fit_linear",
    "fit_location",
    "fit_location_scale",
    "fit_quantiles",
    "monotonicity_audit",
    "BootstrapReport",
    "GofReport",
    "bootstrap_se",
    "confidence_interval",
    "ks_test",
    "parametric_bootstrap",
    "DataError",
    "NamedDataset",
    "builtin",
    "load_csv",
    "write_csv",
]
