"""Asymptotic intervals, bootstrap standard errors and Kolmogorov-Smirnov goodness of fit."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .distributions import DistSpec, Kind, LocationScale, cdf, inv_cdf, uniforms
from .losses import LossSpec
from .solvers import RegressionData, fit_linear, fit_location, fit_location_scale, fit_location_scale_batch

__all__ = [
    "BootstrapReport",
    "GofReport",
    "BootstrapError",
    "z_quantile",
    "asymptotic_variance",
    "confidence_interval",
    "parametric_bootstrap",
    "bootstrap_se",
    "replicate_rng",
    "ks_statistic",
    "kolmogorov_pvalue",
    "fit_distribution",
    "ks_test",
]

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.10


class BootstrapError(RuntimeError):
    pass


@dataclass
class BootstrapReport:
    estimates: np.ndarray
    point: np.ndarray
    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float
    replicates: int
    seed: int
    failures: int = 0
    summary: dict = field(default_factory=dict)


@dataclass
class GofReport:
    statistic_D: float
    p_value: float
    fitted: LocationScale
    dist: Kind
    n: int


def z_quantile(alpha: float) -> float:
    """Upper ``alpha/2`` point of the standard normal."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return float(special.ndtri(1.0 - alpha / 2.0))


def asymptotic_variance(sigma: float, n: int) -> float:
    """Variance ``2 sigma^2 / n`` of the Cosh location MLE (inverse of n times 1/(2 sigma^2))."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    return 2.0 * sigma**2 / n


def confidence_interval(theta_hat: float, sigma: float, n: int, alpha: float = 0.05):
    half = z_quantile(alpha) * math.sqrt(asymptotic_variance(sigma, n))
    return theta_hat - half, theta_hat + half


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Stream for one bootstrap replicate; depends only on (seed, index)."""
    return np.random.default_rng([int(seed), int(index)])


def _summarize(estimates, point, alpha):
    B = estimates.shape[0]
    if B > 1:
        se = estimates.std(axis=0, ddof=1)
    else:
        se = np.zeros(estimates.shape[1])
    lo = np.quantile(estimates, alpha / 2.0, axis=0)
    hi = np.quantile(estimates, 1.0 - alpha / 2.0, axis=0)
    return se, lo, hi


def parametric_bootstrap(spec: DistSpec, n: int, replicates: int, seed: int, alpha: float = 0.05) -> BootstrapReport:
    """Draw ``replicates`` Cosh samples of size ``n`` by inverse transform and refit (theta, sigma).

    ``estimates`` has one row per replicate, columns (theta_hat, sigma_hat).
    ``summary`` carries the mean of theta_hat, n * Var(theta_hat) and the mean of sigma_hat.
    """
    if spec.kind is not Kind.COSH:
        raise ValueError("parametric bootstrap is implemented for the Cosh family")
    if n < 2 or replicates < 1:
        raise ValueError("need n >= 2 and at least one replicate")
    u = np.empty((replicates, n))
    for b in range(replicates):
        u[b] = uniforms(replicate_rng(seed, b), n)
    samples = inv_cdf(spec, u)
    theta, sigma, ok = fit_location_scale_batch(samples)
    est = np.column_stack([theta, sigma])[ok]
    failures = int(np.sum(~ok))
    if failures > MAX_FAILURE_RATE * replicates:
        raise BootstrapError(f"{failures} of {replicates} replicate fits failed")
    point = est.mean(axis=0)
    se, lo, hi = _summarize(est, point, alpha)
    var_theta = float(est[:, 0].var(ddof=1)) if len(est) > 1 else 0.0
    summary = {
        "theta": spec.theta,
        "sigma": spec.sigma,
        "n": n,
        "mean_theta_hat": float(point[0]),
        "n_var_theta_hat": n * var_theta,
        "mean_sigma_hat": float(point[1]),
        "asymptotic_n_var": n * asymptotic_variance(spec.sigma, n),
    }
    return BootstrapReport(est, point, se, lo, hi, alpha, replicates, seed, failures, summary)


def _fit(data, spec, scale):
    if isinstance(data, RegressionData):
        return fit_linear(data, spec, scale=scale)
    if scale is not None:
        raise ValueError("scale option applies to regression fits only")
    return fit_location(data, spec)


def bootstrap_se(
    data,
    spec: LossSpec,
    replicates: int = 2000,
    seed: int = 0,
    alpha: float = 0.05,
    scheme: str = "cases",
    scale=None,
    workers: int = 1,
) -> BootstrapReport:
    """Nonparametric bootstrap of an M-estimate.

    ``scheme="cases"`` resamples observations (rows) with replacement;
    ``scheme="residuals"`` keeps the design fixed and resamples the residuals of
    the original fit.  Failed or non-converged replicate fits are skipped and
    counted; more than 10% failures raise :class:`BootstrapError`.
    Results do not depend on ``workers``.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    if scheme not in ("cases", "residuals"):
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    is_reg = isinstance(data, RegressionData)
    if not is_reg:
        data = np.asarray(data, dtype=float).reshape(-1)
    n = data.n if is_reg else data.size
    base = _fit(data, spec, scale)
    point = np.asarray(base.beta, dtype=float)

    if scheme == "residuals":
        fitted = data.design @ point if is_reg else np.full(n, point[0])
        resid = (data.y if is_reg else data) - fitted

    def one(b):
        idx = replicate_rng(seed, b).integers(0, n, size=n)
        try:
            if scheme == "cases":
                sub = data.take(idx) if is_reg else data[idx]
            else:
                yb = fitted + resid[idx]
                sub = RegressionData(yb, data.X, data.names) if is_reg else yb
            res = _fit(sub, spec, scale)
        except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
            log.debug("replicate %d failed: %s", b, exc)
            return None
        return res.beta if res.converged else None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(b) for b in range(replicates)]
    kept = [r for r in results if r is not None]
    failures = replicates - len(kept)
    if failures > MAX_FAILURE_RATE * replicates:
        raise BootstrapError(f"{failures} of {replicates} replicate fits failed")
    est = np.vstack(kept)
    se, lo, hi = _summarize(est, point, alpha)
    summary = {"scheme": scheme, "loss": spec.kind.value, "n": n}
    return BootstrapReport(est, point, se, lo, hi, alpha, replicates, seed, failures, summary)


# ---------------------------------------------------------------- goodness of fit


def ks_statistic(sample, cdf_fn) -> float:
    """Sup distance between the empirical cdf of ``sample`` and ``cdf_fn``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    F = np.asarray(cdf_fn(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(F - (i - 1) / n)), np.max(np.abs(F - i / n))))


def kolmogorov_pvalue(lam: float) -> float:
    """Asymptotic P(sqrt(n) D > lam) from the Kolmogorov distribution series."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form converges fast for small lam
        k = np.arange(1, 40)
        s = np.sum(np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam * lam)))
        p = 1.0 - math.sqrt(2 * math.pi) / lam * s
    else:
        k = np.arange(1, 100)
        p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam))
    return float(min(max(p, 0.0), 1.0))


def _cauchy_mle(x: np.ndarray) -> LocationScale:
    n = x.size
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    start = np.array([med, math.log(max((q3 - q1) / 2.0, 1e-12 * max(1.0, abs(med))))])

    def nll(par):
        th, eta = par
        z = (x - th) * math.exp(-eta)
        val = n * eta + np.sum(np.log1p(z * z))
        w = 2.0 * z / (1.0 + z * z)
        grad = np.array([-np.sum(w) * math.exp(-eta), n - np.sum(w * z)])
        return val, grad

    res = optimize.minimize(nll, start, jac=True, method="BFGS", options={"gtol": 1e-10})
    return LocationScale(float(res.x[0]), float(math.exp(res.x[1])))


def fit_distribution(sample, kind) -> LocationScale:
    """Maximum-likelihood location and scale for the Gaussian, Cauchy or Cosh family."""
    x = np.asarray(sample, dtype=float).reshape(-1)
    kind = Kind(kind)
    if np.ptp(x) == 0:
        raise ValueError("degenerate sample: all values equal")
    if kind is Kind.GAUSSIAN:
        return LocationScale(float(x.mean()), float(x.std()))
    if kind is Kind.CAUCHY:
        return _cauchy_mle(x)
    if kind is Kind.COSH:
        return fit_location_scale(x)
    raise ValueError(f"no MLE for {kind.value}")


def ks_test(residuals, dist_kind) -> GofReport:
    """Fit ``dist_kind`` to the residuals by MLE, then test the fit with the K-S statistic.

    The p-value is the classical asymptotic Kolmogorov one, without a correction
    for the estimated parameters.
    """
    x = np.asarray(residuals, dtype=float).reshape(-1)
    if x.size < 5:
        raise ValueError("K-S test needs at least 5 residuals")
    kind = Kind(dist_kind)
    ls = fit_distribution(x, kind)
    spec = DistSpec(kind, ls)
    D = ks_statistic(x, lambda t: cdf(spec, t))
    return GofReport(D, kolmogorov_pvalue(math.sqrt(x.size) * D), ls, kind, x.size)
