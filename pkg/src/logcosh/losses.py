"""M-estimator loss families with analytic first and second derivatives.

``rho`` is the per-residual loss, ``psi`` its derivative and ``psi_prime`` the
second derivative.  All three accept scalars or numpy arrays.  The rank
dispersion is not a per-residual loss and lives in :func:`rank_objective`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "LossKind",
    "LossSpec",
    "stable_logcosh",
    "sech2",
    "rho",
    "psi",
    "psi_prime",
    "rank_scores",
    "rank_objective",
    "SMOOTH_KINDS",
    "CONVEX_KINDS",
]

LOG2 = math.log(2.0)


class LossKind(str, Enum):
    L2 = "l2"
    LOGCOSH = "logcosh"
    HUBER = "huber"
    CAUCHY = "cauchy"
    CHECK = "check"
    SMOOTHED_CHECK = "smoothed_check"
    SMRQ = "smrq"
    RANK = "rank"


SMOOTH_KINDS = frozenset(
    {LossKind.L2, LossKind.LOGCOSH, LossKind.HUBER, LossKind.CAUCHY, LossKind.SMOOTHED_CHECK, LossKind.SMRQ}
)
CONVEX_KINDS = SMOOTH_KINDS - {LossKind.CAUCHY}

_NEEDS = {
    LossKind.HUBER: {"delta"},
    LossKind.CHECK: {"tau"},
    LossKind.SMOOTHED_CHECK: {"tau"},
    LossKind.SMRQ: {"tau", "c", "h", "s", "v"},
}


@dataclass(frozen=True)
class LossSpec:
    """A loss family plus whatever parameters that family takes.

    Use the classmethod constructors; they fill in the SMRQ defaults
    ``c = 1/2, h = 0, s = 1/2, v = 1/2``.
    """

    kind: LossKind
    delta: float | None = None
    tau: float | None = None
    c: float | None = None
    h: float | None = None
    s: float | None = None
    v: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        needed = _NEEDS.get(self.kind, set())
        for name in ("delta", "tau", "c", "h", "s", "v"):
            present = getattr(self, name) is not None
            if present and name not in needed:
                raise ValueError(f"{self.kind.value} loss takes no {name}")
            if not present and name in needed:
                raise ValueError(f"{self.kind.value} loss needs {name}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("Huber delta must be positive")
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.c is not None and not self.c > 0:
            raise ValueError("SMRQ curvature c must be positive")

    @classmethod
    def l2(cls):
        return cls(LossKind.L2)

    @classmethod
    def logcosh(cls):
        return cls(LossKind.LOGCOSH)

    @classmethod
    def huber(cls, delta):
        return cls(LossKind.HUBER, delta=float(delta))

    @classmethod
    def cauchy(cls):
        return cls(LossKind.CAUCHY)

    @classmethod
    def check(cls, tau):
        return cls(LossKind.CHECK, tau=float(tau))

    @classmethod
    def smoothed_check(cls, tau):
        return cls(LossKind.SMOOTHED_CHECK, tau=float(tau))

    @classmethod
    def smrq(cls, tau, c=0.5, h=0.0, s=0.5, v=0.5):
        return cls(LossKind.SMRQ, tau=float(tau), c=float(c), h=float(h), s=float(s), v=float(v))

    @classmethod
    def rank(cls):
        return cls(LossKind.RANK)

    def params(self) -> dict:
        return {k: getattr(self, k) for k in ("delta", "tau", "c", "h", "s", "v") if getattr(self, k) is not None}


def _out(val, x):
    return float(val) if np.ndim(x) == 0 else val


def stable_logcosh(x):
    """log(cosh(x)) as ``|x| + log1p(exp(-2|x|)) - log 2``; finite for every finite x.

    Below |x| = 1 the equivalent ``log1p(2 sinh(x/2)^2)`` is used instead, which
    keeps full relative accuracy near zero where the first form cancels.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    t = np.exp(-ax)
    big = ax + np.log1p(t * t) - LOG2
    small = np.log1p(2.0 * np.sinh(0.5 * np.minimum(ax, 1.0)) ** 2)
    return _out(np.where(ax < 1.0, small, big), x)


def sech2(x):
    ax = np.abs(np.asarray(x, dtype=float))
    t = np.exp(-ax)
    return _out((2.0 * t / (1.0 + t * t)) ** 2, x)


def _reject_rank(spec):
    if spec.kind is LossKind.RANK:
        raise ValueError("rank loss is not pointwise; use rank_objective")


def rho(spec: LossSpec, x):
    _reject_rank(spec)
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    k = spec.kind
    if k is LossKind.L2:
        val = 0.5 * np.square(x)
    elif k is LossKind.LOGCOSH:
        val = stable_logcosh(x)
    elif k is LossKind.HUBER:
        d = spec.delta
        ax = np.abs(x)
        val = np.where(ax <= d, 0.5 * np.square(x), d * (ax - 0.5 * d))
    elif k is LossKind.CAUCHY:
        val = np.log1p(np.square(x))
    elif k is LossKind.CHECK:
        val = np.where(x >= 0, spec.tau * x, -(1.0 - spec.tau) * x)
    elif k is LossKind.SMOOTHED_CHECK:
        val = stable_logcosh(x) + (spec.tau - 0.5) * x
    else:
        c = spec.c
        val = stable_logcosh(c * (x - spec.h)) / (2.0 * c) + (spec.tau - spec.s) * x + spec.v
    return _out(val, x)


def psi(spec: LossSpec, x):
    """First derivative of rho.  For the check function at 0 the right-hand slope tau is used."""
    _reject_rank(spec)
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    k = spec.kind
    if k is LossKind.L2:
        val = x
    elif k is LossKind.LOGCOSH:
        val = np.tanh(x)
    elif k is LossKind.HUBER:
        val = np.clip(x, -spec.delta, spec.delta)
    elif k is LossKind.CAUCHY:
        val = 2.0 * x / (1.0 + np.square(x))
    elif k is LossKind.CHECK:
        val = np.where(x >= 0, spec.tau, spec.tau - 1.0)
    elif k is LossKind.SMOOTHED_CHECK:
        val = np.tanh(x) + (spec.tau - 0.5)
    else:
        val = 0.5 * np.tanh(spec.c * (x - spec.h)) + (spec.tau - spec.s)
    return _out(val, x)


def psi_prime(spec: LossSpec, x):
    _reject_rank(spec)
    if spec.kind is LossKind.CHECK:
        raise ValueError("check function has no second derivative")
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    k = spec.kind
    if k is LossKind.L2:
        val = np.ones_like(x)
    elif k in (LossKind.LOGCOSH, LossKind.SMOOTHED_CHECK):
        val = sech2(x)
    elif k is LossKind.HUBER:
        # closed inner region: |x| = delta takes the quadratic branch
        val = np.where(np.abs(x) <= spec.delta, 1.0, 0.0)
    elif k is LossKind.CAUCHY:
        x2 = np.square(x)
        val = 2.0 * (1.0 - x2) / np.square(1.0 + x2)
    else:
        val = 0.5 * spec.c * sech2(spec.c * (x - spec.h))
    return _out(val, x)


def rank_scores(n: int) -> np.ndarray:
    """Wilcoxon scores ``2 i/(n+1) - 1`` for ranks i = 1..n."""
    i = np.arange(1, n + 1, dtype=float)
    return 2.0 * i / (n + 1.0) - 1.0


def rank_objective(residuals) -> float:
    """Jaeckel dispersion ``sum r_i * a(R(r_i))`` with mid-ranks for ties."""
    r = np.asarray(residuals, dtype=float)
    n = r.size
    if n < 2:
        raise ValueError("rank objective needs at least two residuals")
    ranks = rankdata(r, method="average")
    return float(np.dot(r, 2.0 * ranks / (n + 1.0) - 1.0))
