import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logcosh.datasets import builtin, load_csv
from logcosh.distributions import DistSpec, sample
from logcosh.losses import LossSpec, psi, rho
from logcosh.solvers import (
    FitResult,
    QuantileFit,
    RegressionData,
    SingularDesignError,
    ConvergenceError,
    fit_linear,
    fit_location,
    fit_location_scale,
    fit_quantiles,
    monotonicity_audit,
    objective,
)

LOC = builtin("location25").y
TEL = builtin("telephone").regression()


def golden_section(f, a, b, tol=1e-12):
    """Plain golden-section search for a unimodal f on [a, b]."""
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def mp_rho(spec, r):
    k = spec.kind.value
    if k == "logcosh":
        return mpmath.log(mpmath.cosh(r))
    if k == "huber":
        d = mpmath.mpf(spec.delta)
        return r * r / 2 if abs(r) <= d else d * (abs(r) - d / 2)
    if k == "cauchy":
        return mpmath.log(1 + r * r)
    if k == "smrq":
        c = mpmath.mpf(spec.c)
        return mpmath.log(mpmath.cosh(c * (r - spec.h))) / (2 * c) + (spec.tau - spec.s) * r + spec.v
    raise ValueError(k)


def fd_gradient(spec, D, y, beta, scale=1.0):
    """Central differences of the objective in 50-digit arithmetic."""
    with mpmath.workdps(50):
        h = mpmath.mpf("1e-20")
        yb = [mpmath.mpf(float(v)) for v in y]
        Db = [[mpmath.mpf(float(v)) for v in row] for row in D]
        b = [mpmath.mpf(float(v)) for v in beta]
        s = mpmath.mpf(scale)

        def f(bb):
            return sum(mp_rho(spec, (yi - sum(dij * bj for dij, bj in zip(di, bb))) / s) for yi, di in zip(yb, Db))

        g = []
        for j in range(len(b)):
            up = list(b)
            dn = list(b)
            up[j] += h
            dn[j] -= h
            g.append(float((f(up) - f(dn)) / (2 * h)))
    return np.array(g)


# ------------------------------------------------------------------ location


def test_location_examples():
    assert fit_location(LOC, LossSpec.l2()).beta[0] == pytest.approx(0.73, abs=0.005)
    assert fit_location(LOC, LossSpec.logcosh()).beta[0] == pytest.approx(-0.06, abs=0.01)
    assert fit_location(LOC, LossSpec.cauchy()).beta[0] == pytest.approx(-0.19, abs=0.03)


def test_l2_location_is_mean_exactly():
    assert fit_location(LOC, LossSpec.l2()).beta[0] == np.mean(LOC)


@pytest.mark.parametrize("a", [0.5, 1.0, 37.0])
def test_symmetric_three_points(a):
    assert abs(fit_location([-a, 0.0, a], LossSpec.logcosh()).beta[0]) < 1e-10


@pytest.mark.parametrize("spec", [LossSpec.logcosh(), LossSpec.huber(0.5)])
def test_location_gradient_small(spec):
    res = fit_location(LOC, spec)
    assert res.converged
    assert abs(np.sum(psi(spec, LOC - res.beta[0]))) < 1e-10


def test_location_empty():
    with pytest.raises(ValueError):
        fit_location([], LossSpec.logcosh())


def test_location_rejects_rank():
    with pytest.raises(ValueError):
        fit_location(LOC, LossSpec.rank())


def mp_logcosh_sum(x, t):
    # 50-digit objective: in doubles it is flat between well-separated points
    with mpmath.workdps(50):
        return sum(mpmath.log(mpmath.cosh(mpmath.mpf(float(v)) - mpmath.mpf(t))) for v in x)


def test_golden_section_oracle_50_instances():
    rng = np.random.default_rng(20240501)
    for _ in range(50):
        n = int(rng.integers(1, 21))
        x = rng.standard_cauchy(n) * rng.uniform(0.1, 5)
        res = fit_location(x, LossSpec.logcosh())
        ref = golden_section(lambda t: mp_logcosh_sum(x, t), x.min(), x.max())
        assert abs(res.beta[0] - ref) < 1e-6


def test_cauchy_location_is_global_minimum():
    rng = np.random.default_rng(9)
    spec = LossSpec.cauchy()
    for _ in range(20):
        x = np.concatenate([rng.normal(0, 1, 8), rng.normal(15, 1, 6)])
        res = fit_location(x, spec)
        grid = np.linspace(x.min(), x.max(), 20001)
        vals = np.array([np.sum(rho(spec, x - t)) for t in grid])
        assert res.objective <= vals.min() + 1e-9


@given(
    x=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=15),
    c=st.floats(-1e4, 1e4),
)
@settings(deadline=None)
def test_translation_equivariance(x, c):
    x = np.array(x)
    a = fit_location(x, LossSpec.logcosh()).beta[0]
    b = fit_location(x + c, LossSpec.logcosh()).beta[0]
    assert b == pytest.approx(a + c, abs=1e-8 * (1 + abs(c) + np.max(np.abs(x))))


def test_robustness_to_outlier():
    med = np.median(LOC)
    lc = fit_location(LOC, LossSpec.logcosh()).beta[0]
    l2 = fit_location(LOC, LossSpec.l2()).beta[0]
    assert abs(lc - med) < abs(l2 - med)


# ------------------------------------------------------------- location-scale


def test_location_scale_recovers_parameters():
    x = sample(DistSpec.cosh(5.0, 3.0), 20000, 1)
    ls = fit_location_scale(x)
    assert ls.theta == pytest.approx(5.0, abs=0.1)
    assert ls.sigma == pytest.approx(3.0, rel=0.03)


def test_location_scale_stationarity():
    x = sample(DistSpec.cosh(0.0, 1.0), 100, 5)
    ls = fit_location_scale(x)
    z = (x - ls.theta) / ls.sigma
    # d/dtheta and d/dlog(sigma) of the negative log-likelihood
    assert abs(np.sum(np.tanh(z))) / ls.sigma < 1e-8
    assert abs(x.size - np.sum(z * np.tanh(z))) < 1e-8


def test_location_scale_near_degenerate():
    x = 4.0 + 1e-9 * np.random.default_rng(0).standard_normal(50)
    assert fit_location_scale(x).sigma < 1e-6


def test_location_scale_degenerate():
    with pytest.raises((ValueError, ConvergenceError)):
        fit_location_scale(np.full(10, 2.0))


# ------------------------------------------------------------------- linear


def test_regression_data_validation():
    with pytest.raises(ValueError):
        RegressionData([1.0, 2.0], np.ones((2, 2)))
    with pytest.raises(ValueError):
        RegressionData([1.0, np.nan, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        RegressionData([1.0, 2.0, 3.0], np.ones((4, 1)))


def test_singular_design():
    X = np.column_stack([np.arange(6.0), 2 * np.arange(6.0)])
    with pytest.raises(SingularDesignError):
        fit_linear(RegressionData(np.arange(6.0) ** 2, X), LossSpec.logcosh())


def test_telephone_l2():
    res = fit_linear(TEL, LossSpec.l2())
    assert res.beta[1] == pytest.approx(0.504, rel=0.005)
    assert res.beta[0] == pytest.approx(-983.9, rel=0.005)
    assert res.converged and res.gradient_norm < 1e-8


def test_l2_matches_lstsq():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=40)
    D = np.column_stack([np.ones(40), X])
    ref = np.linalg.lstsq(D, y, rcond=None)[0]
    assert np.allclose(fit_linear(RegressionData(y, X), LossSpec.l2()).beta, ref, atol=1e-12)


@pytest.mark.parametrize(
    "spec", [LossSpec.l2(), LossSpec.logcosh(), LossSpec.huber(0.3), LossSpec.smrq(0.3), LossSpec.smoothed_check(0.6)]
)
def test_exact_fit(spec):
    x = np.linspace(-3, 5, 12)
    y = 2 * x + 1
    res = fit_linear(RegressionData(y, x), spec)
    if spec.kind.value in ("l2", "logcosh", "huber"):
        assert np.allclose(res.beta, [1.0, 2.0], atol=1e-8)
    else:
        # asymmetric losses are not minimised at zero residuals; check stationarity instead
        assert res.converged


@pytest.mark.parametrize("spec", [LossSpec.l2(), LossSpec.logcosh(), LossSpec.huber(1.0)])
def test_exact_fit_convex_symmetric(spec):
    x = np.linspace(-3, 5, 12)
    res = fit_linear(RegressionData(2 * x + 1, x), spec)
    assert np.allclose(res.beta, [1.0, 2.0], atol=1e-8)


@pytest.mark.parametrize(
    "spec",
    [LossSpec.logcosh(), LossSpec.huber(0.1), LossSpec.huber(1.345), LossSpec.cauchy(), LossSpec.smrq(0.25), LossSpec.smrq(0.9)],
    ids=lambda s: f"{s.kind.value}{s.params()}",
)
def test_optimality_certificate_telephone(spec):
    res = fit_linear(TEL, spec)
    assert res.converged
    assert res.gradient_norm < 1e-8
    g = fd_gradient(spec, TEL.design, TEL.y, res.beta)
    # the solver's own gradient is computed in doubles, so allow its rounding
    assert np.max(np.abs(g)) < 1e-8 + 1e-10


def test_optimality_certificate_swiss(swiss_path):
    d = load_csv(swiss_path, "Fertility").regression()
    for spec in (LossSpec.logcosh(), LossSpec.huber(1.345), LossSpec.smrq(0.1), LossSpec.smrq(0.9)):
        res = fit_linear(d, spec)
        assert res.converged and res.gradient_norm < 1e-8
        g = fd_gradient(spec, d.design, d.y, res.beta)
        assert np.max(np.abs(g)) < 1e-8 + 1e-10


def test_non_convergence_is_reported():
    res = fit_linear(TEL, LossSpec.logcosh(), max_iter=1)
    assert isinstance(res, FitResult)
    assert not res.converged


def test_fixed_scale():
    a = fit_linear(TEL, LossSpec.logcosh(), scale=2.0)
    assert a.scale == 2.0 and a.converged
    with pytest.raises(ValueError):
        fit_linear(TEL, LossSpec.logcosh(), scale=-1.0)
    with pytest.raises(ValueError):
        fit_linear(TEL, LossSpec.logcosh(), scale="iqr")


def test_huber_mad_matches_statsmodels(swiss_path):
    sm = pytest.importorskip("statsmodels.api")

    class RLM(sm.RLM):
        # R's MASS::rlm divides by 0.6745; statsmodels uses the exact normal quartile
        def _estimate_scale(self, resid):
            return np.median(np.abs(resid)) / 0.6745

    d = load_csv(swiss_path, "Fertility").regression()
    res = fit_linear(d, LossSpec.huber(1.345), scale="mad")
    ref = RLM(d.y, d.design, M=sm.robust.norms.HuberT(t=1.345)).fit(conv="coefs", tol=1e-13, maxiter=1000)
    assert np.allclose(res.beta, ref.params, atol=1e-6)
    assert res.scale == pytest.approx(ref.scale, rel=1e-6)
    assert res.converged and res.iterations > 0


# --------------------------------------------------------------------- rank


def test_rank_telephone():
    res = fit_linear(TEL, LossSpec.rank())
    assert res.beta[1] == pytest.approx(0.146, rel=0.05)
    assert res.beta[0] == pytest.approx(-284.3, rel=0.05)
    assert res.converged


def test_rank_intercept_is_median_residual():
    res = fit_linear(TEL, LossSpec.rank())
    assert res.beta[0] == pytest.approx(np.median(TEL.y - TEL.X @ res.beta[1:]), abs=1e-12)


def test_rank_lp_is_global_minimum():
    # oracle: dense scan of the piecewise-linear dispersion over the slope
    from logcosh.losses import rank_objective

    res = fit_linear(TEL, LossSpec.rank())
    grid = np.linspace(0.0, 0.5, 20001)
    vals = [rank_objective(TEL.y - TEL.X[:, 0] * b) for b in grid]
    assert res.objective <= min(vals) + 1e-9


def test_rank_nelder_mead_agrees_with_lp(swiss_path):
    d = load_csv(swiss_path, "Fertility").regression()
    lp = fit_linear(d, LossSpec.rank())
    nm = fit_linear(d, LossSpec.rank(), rank_method="nelder-mead")
    assert nm.objective == pytest.approx(lp.objective, rel=1e-6)
    assert np.allclose(nm.beta[1:], lp.beta[1:], atol=5e-3)


@pytest.mark.parametrize("c", [-50.0, 3.0, 1000.0])
def test_rank_translation(swiss_path, c):
    d = load_csv(swiss_path, "Fertility").regression()
    a = fit_linear(d, LossSpec.rank())
    b = fit_linear(RegressionData(d.y + c, d.X, d.names), LossSpec.rank())
    assert np.allclose(a.beta[1:], b.beta[1:], atol=1e-4)
    assert b.beta[0] == pytest.approx(a.beta[0] + c, abs=1e-4)


def test_rank_location_is_median():
    res = fit_linear(RegressionData(LOC, np.empty((25, 0))), LossSpec.rank())
    assert res.beta[0] == np.median(LOC)


# ----------------------------------------------------------------- quantile


def test_smrq_midpoint_convexity(swiss_path):
    d = load_csv(swiss_path, "Fertility").regression()
    rng = np.random.default_rng(11)
    base = fit_linear(d, LossSpec.l2()).beta
    for _ in range(100):
        spec = LossSpec.smrq(float(rng.uniform(0.05, 0.95)))
        a = base + rng.normal(scale=[5, 0.2, 0.2, 0.2, 0.2, 0.5])
        b = base + rng.normal(scale=[5, 0.2, 0.2, 0.2, 0.2, 0.5])
        f = lambda beta: objective(spec, d.y - d.design @ beta)
        assert f(0.5 * (a + b)) <= 0.5 * (f(a) + f(b)) + 1e-10 * (1 + abs(f(a)) + abs(f(b)))


def _synthetic(n=200, seed=4, noise="logistic"):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, n)
    e = rng.logistic(size=n) if noise == "logistic" else rng.normal(size=n)
    return RegressionData(1.0 + 0.5 * x + e, x)


def test_median_smrq_close_to_logcosh():
    d = _synthetic()
    q = fit_linear(d, LossSpec.smrq(0.5))
    lc = fit_linear(d, LossSpec.logcosh())
    assert abs(q.beta[1] - lc.beta[1]) < 0.05


def brute_grid(spec, d, center, width, rounds=8, m=41):
    """Shrinking 2-D grid search; needs no derivatives."""
    c = np.array(center, dtype=float)
    w = np.array(width, dtype=float)
    for _ in range(rounds):
        b0 = np.linspace(c[0] - w[0], c[0] + w[0], m)
        b1 = np.linspace(c[1] - w[1], c[1] + w[1], m)
        B0, B1 = np.meshgrid(b0, b1, indexing="ij")
        R = d.y[None, None, :] - B0[..., None] - B1[..., None] * d.X[:, 0][None, None, :]
        vals = rho(spec, R).sum(axis=-1)
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        c = np.array([b0[i], b1[j]])
        w = w / 4
    return c


def test_quantile_grid_oracle_and_ordering():
    d = _synthetic(n=150, seed=8)
    qf = fit_quantiles(d, [0.25, 0.5, 0.75])
    for tau, f in zip(qf.taus, qf.fits):
        ref = brute_grid(LossSpec.smrq(tau), d, f.beta + 0.3, [3.0, 3.0])
        assert np.allclose(f.beta, ref, atol=1e-3)
    b0 = [f.beta[0] for f in qf.fits]
    assert b0[0] <= b0[1] <= b0[2]


def test_single_tau_equals_direct_fit():
    d = _synthetic()
    qf = fit_quantiles(d, [0.3])
    assert len(qf.fits) == 1
    direct = fit_linear(d, LossSpec.smrq(0.3))
    assert np.array_equal(qf.fits[0].beta, direct.beta)


def test_quantile_tau_validation():
    d = _synthetic()
    with pytest.raises(ValueError):
        fit_quantiles(d, [0.9, 0.1])
    with pytest.raises(ValueError):
        fit_quantiles(d, [])
    with pytest.raises(ValueError):
        fit_quantiles(d, [0.5, 0.5])


def test_audit_identical_planes():
    d = _synthetic()
    f = fit_linear(d, LossSpec.smrq(0.5))
    rep = monotonicity_audit(QuantileFit([0.4, 0.6], [f, f]), d)
    assert rep.violations == 0
    assert rep.below_fraction[0] == rep.below_fraction[1]


def test_audit_crossing_counterexample():
    d = _synthetic()
    hi = FitResult(np.array([5.0, 0.5]), 0.0, True, 0, 0.0)
    lo = FitResult(np.array([-5.0, 0.5]), 0.0, True, 0, 0.0)
    rep = monotonicity_audit(QuantileFit([0.5, 0.75], [hi, lo]), d)
    assert rep.violations >= 1


def test_audit_strict_inequality():
    d = RegressionData([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0])
    on_line = FitResult(np.array([0.0, 1.0]), 0.0, True, 0, 0.0)
    rep = monotonicity_audit(QuantileFit([0.5], [on_line]), d)
    assert rep.below_fraction[0] == 0.0


def test_audit_dimension_mismatch():
    d = _synthetic()
    f = FitResult(np.array([0.0, 1.0, 2.0]), 0.0, True, 0, 0.0)
    with pytest.raises(ValueError):
        monotonicity_audit(QuantileFit([0.5], [f]), d)


def test_swiss_deciles_monotone(swiss_path):
    d = load_csv(swiss_path, "Fertility").regression()
    taus = np.round(np.arange(1, 10) / 10, 2)
    qf = fit_quantiles(d, taus)
    assert all(f.converged for f in qf.fits)
    rep = monotonicity_audit(qf, d)
    assert rep.violations == 0
    assert np.all((rep.below_fraction >= 0) & (rep.below_fraction <= 1))
