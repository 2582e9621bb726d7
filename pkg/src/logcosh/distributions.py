"""Cosh, Cauchy, Gaussian and skewed-Cosh location-scale families.

The Cosh (hyperbolic secant) density is ``1 / (pi * sigma * cosh((x - theta) / sigma))``;
its negative log-likelihood is the log-cosh loss.  The skewed variant
``exp(-(tau - 1/2) z) / (kappa * sigma * cosh z)`` is the quantile density whose
negative log-likelihood is the smoothed check function.

Everything here works on scalars and on numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "Kind",
    "LocationScale",
    "DistSpec",
    "Moments",
    "UNDEFINED",
    "pdf",
    "cdf",
    "inv_cdf",
    "sample",
    "moments",
    "kappa",
    "fisher_information",
    "fisher_information_quad",
    "uniforms",
]

QUAD_EPSABS = 1e-10
WINDOW = 50.0


class Kind(str, Enum):
    COSH = "cosh"
    CAUCHY = "cauchy"
    GAUSSIAN = "gaussian"
    SKEWED_COSH = "skewed"


@dataclass(frozen=True)
class LocationScale:
    theta: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class DistSpec:
    kind: Kind
    params: LocationScale = LocationScale()
    tau: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.SKEWED_COSH:
            # tau = 0 and tau = 1 still give a proper density (tails decay like e^{-|z|/2})
            if self.tau is None or not 0.0 <= self.tau <= 1.0:
                raise ValueError(f"skewed Cosh needs 0 <= tau <= 1, got {self.tau}")
        elif self.tau is not None:
            raise ValueError(f"{self.kind.value} distribution takes no tau")

    @classmethod
    def cosh(cls, theta=0.0, sigma=1.0):
        return cls(Kind.COSH, LocationScale(theta, sigma))

    @classmethod
    def cauchy(cls, theta=0.0, sigma=1.0):
        return cls(Kind.CAUCHY, LocationScale(theta, sigma))

    @classmethod
    def gaussian(cls, theta=0.0, sigma=1.0):
        return cls(Kind.GAUSSIAN, LocationScale(theta, sigma))

    @classmethod
    def skewed(cls, tau, theta=0.0, sigma=1.0):
        return cls(Kind.SKEWED_COSH, LocationScale(theta, sigma), tau)

    @property
    def theta(self):
        return self.params.theta

    @property
    def sigma(self):
        return self.params.sigma


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "undefined"

    __str__ = __repr__


UNDEFINED = _Undefined()


@dataclass(frozen=True)
class Moments:
    mean: float | _Undefined
    variance: float | _Undefined

    def __post_init__(self):
        if self.variance is not UNDEFINED and self.variance < 0:
            raise ValueError("variance must be nonnegative")


def _sech(z):
    t = np.exp(-np.abs(z))
    return 2.0 * t / (1.0 + t * t)


def _skew_kernel(z, tau):
    """exp(-(tau - 1/2) z) / cosh(z), evaluated without overflow."""
    a = tau - 0.5
    az = np.abs(z)
    return 2.0 * np.exp(-a * z - az) / (1.0 + np.exp(-2.0 * az))


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


@lru_cache(maxsize=256)
def kappa(tau: float) -> float:
    """Normalizing constant of the skewed Cosh density, by adaptive quadrature."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    f = lambda z: float(_skew_kernel(z, tau))
    left, _ = integrate.quad(f, -np.inf, 0.0, epsabs=QUAD_EPSABS, epsrel=1e-13, limit=200)
    right, _ = integrate.quad(f, 0.0, np.inf, epsabs=QUAD_EPSABS, epsrel=1e-13, limit=200)
    return left + right


def pdf(spec: DistSpec, x):
    z = (np.asarray(x, dtype=float) - spec.theta) / spec.sigma
    s = spec.sigma
    if spec.kind is Kind.COSH:
        out = _sech(z) / (math.pi * s)
    elif spec.kind is Kind.CAUCHY:
        out = 1.0 / (math.pi * s * (1.0 + z * z))
    elif spec.kind is Kind.GAUSSIAN:
        out = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * s)
    else:
        out = _skew_kernel(z, spec.tau) / (kappa(spec.tau) * s)
    return _scalar_or_array(out, x)


def _skewed_cdf_scalar(z: float, tau: float) -> float:
    k = kappa(tau)
    f = lambda t: float(_skew_kernel(t, tau))
    # integrate from the nearer end to keep tail probabilities accurate
    if z <= 0.0:
        lo = max(z, -WINDOW)
        if z < -WINDOW:
            return 0.0
        val, _ = integrate.quad(f, -np.inf, lo, epsabs=1e-14, epsrel=1e-12, limit=200)
        return min(max(val / k, 0.0), 1.0)
    if z > WINDOW:
        return 1.0
    val, _ = integrate.quad(f, z, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return min(max(1.0 - val / k, 0.0), 1.0)


def cdf(spec: DistSpec, x):
    z = (np.asarray(x, dtype=float) - spec.theta) / spec.sigma
    if spec.kind is Kind.COSH:
        # 1/2 + arctan(sinh z)/pi, rewritten as (2/pi) arctan(e^z) to avoid sinh overflow
        out = np.where(
            z <= 0,
            2.0 / math.pi * np.arctan(np.exp(np.minimum(z, 0.0))),
            1.0 - 2.0 / math.pi * np.arctan(np.exp(-np.maximum(z, 0.0))),
        )
    elif spec.kind is Kind.CAUCHY:
        out = 0.5 + np.arctan(z) / math.pi
    elif spec.kind is Kind.GAUSSIAN:
        out = special.ndtr(z)
    else:
        out = np.vectorize(lambda t: _skewed_cdf_scalar(t, spec.tau), otypes=[float])(z)
    return _scalar_or_array(out, x)


def inv_cdf(spec: DistSpec, u):
    ua = np.asarray(u, dtype=float)
    if np.any(~((ua > 0.0) & (ua < 1.0))):
        raise ValueError("inv_cdf needs 0 < u < 1")
    if spec.kind is Kind.COSH:
        z = np.arcsinh(np.tan((ua - 0.5) * math.pi))
    elif spec.kind is Kind.CAUCHY:
        z = np.tan((ua - 0.5) * math.pi)
    elif spec.kind is Kind.GAUSSIAN:
        z = special.ndtri(ua)
    else:
        z = np.vectorize(lambda p: _skewed_inv_scalar(p, spec.tau), otypes=[float])(ua)
    return _scalar_or_array(spec.theta + spec.sigma * z, u)


def _skewed_inv_scalar(p: float, tau: float) -> float:
    g = lambda z: _skewed_cdf_scalar(z, tau) - p
    lo, hi = -1.0, 1.0
    while g(lo) > 0:
        lo *= 2.0
    while g(hi) < 0:
        hi *= 2.0
    return optimize.brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws strictly inside (0, 1), so the inverse transform never hits +-inf."""
    return (rng.integers(0, 2**53, size=size) + 0.5) / 2.0**53


def sample(spec: DistSpec, n: int, seed: int) -> np.ndarray:
    """Inverse-transform sample of size ``n``; identical output for identical seeds."""
    if n < 1:
        raise ValueError("n must be at least 1")
    u = uniforms(np.random.default_rng(seed), n)
    return np.asarray(inv_cdf(spec, u), dtype=float).reshape(n)


def _quad_expect(spec: DistSpec, g) -> float:
    lo = spec.theta - WINDOW * spec.sigma
    hi = spec.theta + WINDOW * spec.sigma
    val, _ = integrate.quad(
        lambda x: g(x) * pdf(spec, x), lo, hi, points=[spec.theta], epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400
    )
    return val


def moments(spec: DistSpec) -> Moments:
    th, s = spec.theta, spec.sigma
    if spec.kind is Kind.COSH:
        return Moments(th, math.pi**2 * s**2 / 4.0)
    if spec.kind is Kind.GAUSSIAN:
        return Moments(th, s**2)
    if spec.kind is Kind.CAUCHY:
        return Moments(UNDEFINED, UNDEFINED)
    m1 = _quad_expect(spec, lambda x: x)
    c2 = _quad_expect(spec, lambda x: (x - m1) ** 2)
    return Moments(m1, c2)


def fisher_information_quad(spec: DistSpec) -> float:
    """E[(d/dtheta log f)^2] by quadrature, for the Cosh and skewed Cosh families."""
    if spec.kind is Kind.COSH:
        a = 0.0
    elif spec.kind is Kind.SKEWED_COSH:
        a = spec.tau - 0.5
    else:
        raise ValueError(f"Fisher information not provided for {spec.kind.value}")
    s = spec.sigma
    # score in theta is (a + tanh z) / sigma
    return _quad_expect(spec, lambda x: ((a + math.tanh((x - spec.theta) / s)) / s) ** 2)


def fisher_information(spec: DistSpec) -> float:
    """Location Fisher information: ``1/(2 sigma^2)`` for Cosh, quadrature for skewed Cosh."""
    if spec.kind is Kind.COSH:
        return 1.0 / (2.0 * spec.sigma**2)
    return fisher_information_quad(spec)
