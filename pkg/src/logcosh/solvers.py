"""Estimators: location, location-scale MLE, linear regression and SMRQ quantile regression."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .distributions import LocationScale
from .losses import CONVEX_KINDS, LossKind, LossSpec, psi, psi_prime, rank_objective, rho, sech2, stable_logcosh

__all__ = [
    "RegressionData",
    "FitResult",
    "QuantileFit",
    "MonotonicityReport",
    "SingularDesignError",
    "ConvergenceError",
    "fit_location",
    "fit_location_scale",
    "fit_location_scale_batch",
    "fit_linear",
    "fit_quantiles",
    "monotonicity_audit",
    "objective",
]

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
LOCATION_TOL = 1e-10
MAX_ITER = 200
ARMIJO = 1e-4
SHRINK = 0.5
CAUCHY_STARTS = 10
MAD_CONST = 0.6745
EPS = np.finfo(float).eps


class SingularDesignError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegressionData:
    """Response ``y`` (length n) and predictors ``X`` (n x p, no intercept column)."""

    y: np.ndarray
    X: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else np.empty((y.size, 0))
        if X.shape[0] != y.size:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not y.size > X.shape[1]:
            raise ValueError(f"need n > p, got n={y.size}, p={X.shape[1]}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("data contain non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self):
        return self.y.size

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def design(self):
        return np.column_stack([np.ones(self.n), self.X])

    def take(self, rows):
        return RegressionData(self.y[rows], self.X[rows], self.names)


@dataclass
class FitResult:
    beta: np.ndarray
    objective: float
    converged: bool
    iterations: int
    gradient_norm: float
    loss: LossSpec | None = None
    scale: float | None = None

    @property
    def intercept(self):
        return float(self.beta[0])

    @property
    def slopes(self):
        return self.beta[1:]


@dataclass
class QuantileFit:
    taus: np.ndarray
    fits: list
    loss_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        if len(self.taus) != len(self.fits):
            raise ValueError("one fit per tau required")
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("taus must be strictly increasing")


@dataclass
class MonotonicityReport:
    taus: np.ndarray
    below_fraction: np.ndarray
    violations: int


# ----------------------------------------------------------------- objectives


def objective(spec: LossSpec, residuals, scale: float = 1.0) -> float:
    r = np.asarray(residuals, dtype=float)
    if spec.kind is LossKind.RANK:
        return rank_objective(r)
    return float(np.sum(rho(spec, r / scale)))


def _gradient(spec, D, r, scale):
    return -(D.T @ psi(spec, r / scale)) / scale


def _hessian(spec, D, r, scale):
    w = psi_prime(spec, r / scale) / scale**2
    return D.T @ (w[:, None] * D)


# ------------------------------------------------------------------- location


def _location_convex(x: np.ndarray, spec: LossSpec) -> FitResult:
    """Root of sum psi(x - theta) by Newton steps kept inside a sign-change bracket."""
    g = lambda t: float(np.sum(psi(spec, x - t)))
    lo, hi = float(x.min()), float(x.max())
    width = max(hi - lo, 1.0)
    while g(lo) < 0:
        lo -= width
    while g(hi) > 0:
        hi += width
    theta = float(np.median(x))
    it = 0
    for it in range(1, MAX_ITER + 1):
        gt = g(theta)
        if abs(gt) < LOCATION_TOL:
            break
        if gt > 0:
            lo = theta
        else:
            hi = theta
        h = float(np.sum(psi_prime(spec, x - theta)))
        step = theta + gt / h if h > 0 else math.nan
        theta = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(theta)):
            break
    gt = g(theta)
    return FitResult(
        np.array([theta]), objective(spec, x - theta), abs(gt) < LOCATION_TOL, it, abs(gt), spec
    )


def fit_location(data, spec: LossSpec) -> FitResult:
    """M-estimate of location: the theta minimising ``sum rho(x_i - theta)``."""
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("empty data")
    if spec.kind is LossKind.L2:
        theta = float(np.mean(x))
        return FitResult(np.array([theta]), objective(spec, x - theta), True, 0, abs(float(np.sum(x - theta))), spec)
    if spec.kind in CONVEX_KINDS:
        return _location_convex(x, spec)
    if spec.kind is LossKind.CAUCHY:
        return _location_multistart(x, spec)
    raise ValueError(f"{spec.kind.value} loss is not supported for location fits")


def _location_local(x, spec, theta):
    """Damped Newton descent on sum rho(x - theta) from one start (rho may be non-convex)."""
    f = lambda t: float(np.sum(rho(spec, x - t)))
    fval = f(theta)
    it = 0
    for it in range(1, MAX_ITER + 1):
        g = float(np.sum(psi(spec, x - theta)))  # minus the derivative in theta
        if abs(g) < LOCATION_TOL:
            break
        h = float(np.sum(psi_prime(spec, x - theta)))
        d = g / h if h > 0 else g
        t = 1.0
        while t > 1e-14:
            cand = theta + t * d
            fc = f(cand)
            if fc <= fval - ARMIJO * t * g * d or (
                abs(fc - fval) <= 1e-13 * max(1.0, abs(fval)) and abs(np.sum(psi(spec, x - cand))) < abs(g)
            ):
                break
            t *= SHRINK
        else:
            break
        theta, fval = cand, fc
    g = abs(float(np.sum(psi(spec, x - theta))))
    return FitResult(np.array([theta]), fval, g < LOCATION_TOL, it, g, spec)


def _location_multistart(x, spec):
    starts = np.concatenate([[x.mean()], np.linspace(x.min(), x.max(), CAUCHY_STARTS)])
    best = None
    for s0 in starts:
        res = _location_local(x, spec, float(s0))
        if best is None or (res.converged, -res.objective) > (best.converged, -best.objective):
            best = res
    return best


def _neg_loglik_ls(x, theta, eta):
    z = (x - theta[:, None]) * np.exp(-eta)[:, None]
    return x.shape[1] * eta + np.sum(stable_logcosh(z), axis=1)


def fit_location_scale_batch(samples, tol: float = 1e-10, max_iter: int = 200):
    """Joint Cosh MLE of (theta, sigma) for each row of ``samples``.

    Alternates a Newton step in theta with a Newton step in log sigma; both
    coordinate problems are convex.  Returns ``(theta, sigma, converged)``.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    m, n = x.shape
    theta = np.median(x, axis=1)
    sd = np.std(x, axis=1)
    if np.any(sd == 0):
        raise ValueError("degenerate data: all values equal, scale is zero")
    eta = np.log(2.0 * sd / math.pi)
    converged = np.zeros(m, dtype=bool)

    for _ in range(max_iter):
        sigma = np.exp(eta)
        z = (x - theta[:, None]) / sigma[:, None]
        t = np.tanh(z)
        g_theta = t.sum(axis=1)
        g_eta = n - np.sum(z * t, axis=1)
        # x - theta carries rounding of order eps*|x|, i.e. eps*|x|/sigma in z
        floor = 8.0 * EPS * n * np.max(np.abs(x), axis=1) / sigma
        lim = np.maximum(tol, floor)
        converged = (np.abs(g_theta) < lim) & (np.abs(g_eta) < lim)
        if converged.all():
            break
        active = ~converged

        # theta step (objective decreases along tanh-weighted direction)
        h_theta = sech2(z).sum(axis=1)
        step = np.where(active, sigma * g_theta / h_theta, 0.0)
        f0 = _neg_loglik_ls(x, theta, eta)
        theta = _backtrack(lambda th: _neg_loglik_ls(x, th, eta), theta, step, f0)

        # log-sigma step
        z = (x - theta[:, None]) / sigma[:, None]
        zt = z * np.tanh(z)
        g_eta = n - zt.sum(axis=1)
        h_eta = np.sum(zt + z * z * sech2(z), axis=1)
        step = np.where(active & (h_eta > 0), -g_eta / np.where(h_eta > 0, h_eta, 1.0), 0.0)
        f0 = _neg_loglik_ls(x, theta, eta)
        eta = _backtrack(lambda e: _neg_loglik_ls(x, theta, e), eta, step, f0)

    return theta, np.exp(eta), converged


def _backtrack(f, start, step, f0, max_halvings=60):
    t = np.ones_like(start)
    out = start + step
    for _ in range(max_halvings):
        bad = f(out) > f0 + 1e-15 * np.abs(f0)
        if not bad.any():
            break
        t = np.where(bad, t * SHRINK, t)
        out = np.where(bad, start + t * step, out)
    return out


def fit_location_scale(data) -> LocationScale:
    """Cosh maximum-likelihood location and scale of a sample (n >= 2)."""
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValueError("need at least two observations")
    theta, sigma, ok = fit_location_scale_batch(x[None, :])
    if not ok[0]:
        raise ConvergenceError("location-scale MLE did not converge")
    return LocationScale(float(theta[0]), float(sigma[0]))


# --------------------------------------------------------------------- linear


def _l2_solution(y, D):
    T = _standardizer(D)
    Dz = D @ T
    gamma, _, rank, _ = np.linalg.lstsq(Dz, y, rcond=None)
    if rank < D.shape[1]:
        raise SingularDesignError("design matrix is rank deficient")
    # one step of iterative refinement on the residual
    gamma = gamma + np.linalg.lstsq(Dz, y - Dz @ gamma, rcond=None)[0]
    return T @ gamma


def _standardizer(D):
    """Affine map to a centred, unit-spread design; Newton directions are unchanged by it."""
    center = D[:, 1:].mean(axis=0)
    spread = D[:, 1:].std(axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    T = np.eye(D.shape[1])
    T[1:, 1:] = np.diag(1.0 / spread)
    T[0, 1:] = -center / spread
    # beta = T @ gamma, and D @ T is the standardized design
    return T


def _newton(y, D, spec, beta0, scale=1.0, tol=GRAD_TOL, max_iter=MAX_ITER):
    T = _standardizer(D)
    Dz = D @ T
    gamma = np.linalg.solve(T, beta0)
    f = lambda gm: objective(spec, y - Dz @ gm, scale)
    fval = f(gamma)
    steps = 0
    while True:
        r = y - Dz @ gamma
        gnorm = float(np.max(np.abs(_gradient(spec, D, r, scale))))
        if gnorm < tol or steps >= max_iter:
            break
        g = _gradient(spec, Dz, r, scale)
        d = _descent_direction(_hessian(spec, Dz, r, scale), g)
        slope = float(g @ d)
        t = 1.0
        while t > 1e-14:
            cand = gamma + t * d
            fc = f(cand)
            if fc <= fval + ARMIJO * t * slope:
                break
            # near the optimum the objective no longer resolves the decrease; judge by the gradient
            if abs(fc - fval) <= 1e-13 * max(1.0, abs(fval)):
                gc = _gradient(spec, Dz, y - Dz @ cand, scale)
                if np.max(np.abs(gc)) < np.max(np.abs(g)):
                    break
            t *= SHRINK
        else:
            break
        gamma, fval = cand, fc
        steps += 1
    return T @ gamma, fval, gnorm < tol, steps, gnorm


def _descent_direction(H, g):
    """Newton direction, damped towards steepest descent until the system is positive definite."""
    k = H.shape[0]
    mu = 0.0
    base = max(float(np.max(np.abs(np.diag(H)))), 1.0) * 1e-10
    for _ in range(60):
        try:
            L = np.linalg.cholesky(H + mu * np.eye(k))
            d = -np.linalg.solve(L.T, np.linalg.solve(L, g))
            if np.all(np.isfinite(d)):
                return d
        except np.linalg.LinAlgError:
            pass
        mu = base if mu == 0.0 else mu * 10.0
    return -g


def _multistart(y, D, spec, beta_l2, scale):
    """Lowest local minimum over the L2 start and intercept shifts spread over the residual range."""
    r = y - D @ beta_l2
    shifts = np.concatenate([[0.0], np.linspace(r.min(), r.max(), CAUCHY_STARTS)])
    best = None
    for sh in shifts:
        start = beta_l2.copy()
        start[0] += sh
        res = FitResult(*_newton(y, D, spec, start, scale), loss=spec)
        if best is None or (res.converged, -res.objective) > (best.converged, -best.objective):
            best = res
    return best


def _mad_scale(r):
    s = float(np.median(np.abs(r))) / MAD_CONST
    if s <= 0:
        raise ValueError("residual scale is zero")
    return s


def _rank_lp(y, X):
    """Slopes minimising the Wilcoxon dispersion, solved exactly as an LP.

    With scores 2i/(n+1) - 1 the dispersion equals sum_{i<j} |e_i - e_j| / (n+1),
    an L1 fit of pairwise response differences on pairwise predictor differences.
    """
    n, p = X.shape
    i, j = np.triu_indices(n, 1)
    dy = y[j] - y[i]
    dX = X[j] - X[i]
    # dual of the L1 fit: max dy.d  s.t.  dX^T d = 0, -1 <= d <= 1; slopes are minus the equality marginals
    res = optimize.linprog(-dy, A_eq=dX.T, b_eq=np.zeros(p), bounds=(-1.0, 1.0), method="highs")
    if res.status != 0:
        return None, False, int(getattr(res, "nit", 0) or 0)
    return -np.asarray(res.eqlin.marginals, dtype=float), True, int(res.nit)


def _rank_nelder_mead(y, X, start):
    spread = X.std(axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    f = lambda u: rank_objective(y - X @ (u / spread))
    u = start * spread
    total_it = 0
    ok = False
    best = f(u)
    for _ in range(8):
        step = np.maximum(0.1 * np.abs(u), 0.05 * max(1.0, float(np.std(y))))
        simplex = np.vstack([u] + [u + step[k] * np.eye(len(u))[k] for k in range(len(u))])
        res = optimize.minimize(
            f, u, method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": 1e-6, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000},
        )
        total_it += res.nit
        ok = bool(res.success)
        improved = res.fun < best - 1e-12 * max(1.0, abs(best))
        u, best = res.x, min(res.fun, best)
        if not improved:
            break
    return u / spread, ok, total_it


def _fit_rank(data: RegressionData, spec: LossSpec, beta_l2, method="lp"):
    y, X = data.y, data.X
    if data.p == 0:
        b0 = float(np.median(y))
        return FitResult(np.array([b0]), rank_objective(y - b0), True, 0, math.nan, spec)
    if method == "lp":
        slopes, ok, it = _rank_lp(y, X)
        if slopes is None:
            return FitResult(beta_l2, rank_objective(y - data.design @ beta_l2), False, it, math.nan, spec)
    elif method == "nelder-mead":
        slopes, ok, it = _rank_nelder_mead(y, X, beta_l2[1:])
    else:
        raise ValueError(f"unknown rank method {method!r}")
    b0 = float(np.median(y - X @ slopes))
    return FitResult(np.concatenate([[b0], slopes]), rank_objective(y - X @ slopes), ok, it, math.nan, spec)


def fit_linear(
    data: RegressionData,
    spec: LossSpec,
    scale=None,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    rank_method: str = "lp",
) -> FitResult:
    """Fit ``y = b0 + X b`` by minimising ``sum rho(r_i / scale)``.

    ``scale`` is ``None`` (raw residuals), a fixed positive number, or
    ``"mad"``: the residual scale is re-estimated as ``median|r| / 0.6745``
    alternately with the coefficients until both settle.
    Rank fits minimise the Wilcoxon dispersion over the slopes (exact LP by
    default, or ``rank_method="nelder-mead"``) and set the intercept to the
    median residual.
    Non-convergence is reported through ``converged=False``; it never raises.
    """
    y, D = data.y, data.design
    beta_l2 = _l2_solution(y, D)
    if spec.kind is LossKind.L2 and scale is None:
        r = y - D @ beta_l2
        gnorm = float(np.max(np.abs(D.T @ r)))
        return FitResult(beta_l2, objective(spec, r), gnorm < tol, 0, gnorm, spec)
    if spec.kind is LossKind.RANK:
        return _fit_rank(data, spec, beta_l2, rank_method)
    if spec.kind not in CONVEX_KINDS | {LossKind.CAUCHY}:
        raise ValueError(f"{spec.kind.value} loss is not supported for regression")

    def solve(s, start):
        if spec.kind is LossKind.CAUCHY:
            return _multistart(y, D, spec, start, s)
        return FitResult(*_newton(y, D, spec, start, s, tol, max_iter), loss=spec)

    if scale is None or not isinstance(scale, str):
        s = 1.0 if scale is None else float(scale)
        if not s > 0:
            raise ValueError("scale must be positive")
        res = solve(s, beta_l2)
        res.scale = None if scale is None else s
        return res
    if scale != "mad":
        raise ValueError(f"unknown scale rule {scale!r}")

    beta = beta_l2
    s = _mad_scale(y - D @ beta)
    res = None
    steps = 0
    for _ in range(100):
        res = solve(s, beta)
        steps += res.iterations
        s_new = _mad_scale(y - D @ res.beta)
        moved = np.max(np.abs(res.beta - beta)) <= 1e-10 * (1.0 + np.max(np.abs(beta)))
        beta = res.beta
        if moved and abs(s_new - s) <= 1e-10 * s:
            s = s_new
            break
        s = s_new
    else:
        res.converged = False
    res.scale = s
    res.iterations = steps
    return res


# ------------------------------------------------------------------- quantile


def fit_quantiles(data: RegressionData, taus, c: float = 0.5, h: float = 0.0, s: float = 0.5, v: float = 0.5) -> QuantileFit:
    taus = np.asarray(list(taus), dtype=float)
    if taus.size == 0:
        raise ValueError("no quantile levels given")
    if np.any(np.diff(taus) <= 0):
        raise ValueError("taus must be strictly increasing")
    fits = [fit_linear(data, LossSpec.smrq(t, c=c, h=h, s=s, v=v)) for t in taus]
    return QuantileFit(taus, fits, {"c": c, "h": h, "s": s, "v": v})


def monotonicity_audit(fit: QuantileFit, data: RegressionData) -> MonotonicityReport:
    """Fraction of observations strictly below each fitted quantile surface."""
    D = data.design
    fractions = []
    for f in fit.fits:
        if f.beta.size != D.shape[1]:
            raise ValueError("fit and data dimensions disagree")
        fractions.append(float(np.mean(data.y < D @ f.beta)))
    fractions = np.array(fractions)
    return MonotonicityReport(fit.taus.copy(), fractions, int(np.sum(np.diff(fractions) < 0)))
