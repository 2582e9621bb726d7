"""Command-line interface: ``logcosh <command> [options]``.

Every command prints a plain-text report and, with ``--json PATH``, writes the
same report as JSON ``{command, inputs, results, schema_version}``.
Exit status: 0 success, 1 usage or input error, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from . import datasets
from .distributions import UNDEFINED, DistSpec, Kind, LocationScale, cdf, fisher_information, inv_cdf, kappa, moments, pdf, sample
from .inference import BootstrapError, bootstrap_se, confidence_interval, ks_test, parametric_bootstrap
from .losses import LossSpec, psi, rho
from .solvers import ConvergenceError, SingularDesignError, fit_linear, fit_location, fit_quantiles, monotonicity_audit

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class NotConverged(Exception):
    def __init__(self, report):
        super().__init__("solver did not converge")
        self.report = report


@dataclass
class Report:
    command: str
    inputs: dict
    results: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def to_dict(self):
        return {
            "command": self.command,
            "inputs": _jsonable(self.inputs),
            "results": _jsonable(self.results),
            "schema_version": self.schema_version,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if obj is UNDEFINED:
        return "undefined"
    return obj


def _format(value, indent=2):
    pad = " " * indent
    if isinstance(value, dict):
        lines = []
        for k, v in value.items():
            if isinstance(v, dict):
                lines.append(f"{pad}{k}:")
                lines.append(_format(v, indent + 2))
            else:
                lines.append(f"{pad}{k}: {_fmt_scalar(v)}")
        return "\n".join(lines)
    return f"{pad}{_fmt_scalar(value)}"


def _fmt_scalar(v):
    if isinstance(v, float):
        return f"{v:.7g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_scalar(x) for x in v) + "]"
    return str(v)


def emit(report: Report, json_path=None, out=None):
    out = sys.stdout if out is None else out
    d = report.to_dict()
    out.write(f"== {d['command']} ==\n")
    out.write("inputs:\n" + _format(d["inputs"]) + "\n")
    out.write("results:\n" + _format(d["results"]) + "\n")
    if json_path:
        Path(json_path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ helpers


def _taus(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse tau list {text!r}") from None
    if not vals:
        raise UsageError("empty tau list")
    if any(not 0 < t < 1 for t in vals):
        raise UsageError("taus must lie in (0, 1)")
    return vals


def _dataset(args):
    if args.data in datasets.available():
        return datasets.builtin(args.data)
    if not args.response:
        raise UsageError(f"--response is required for CSV data ({args.data})")
    return datasets.load_csv(args.data, args.response)


def _loss(args):
    name = args.loss
    if name == "huber":
        if args.delta is None:
            raise UsageError("--loss huber needs --delta")
        return LossSpec.huber(args.delta)
    if args.delta is not None:
        raise UsageError("--delta applies to --loss huber only")
    return {
        "l2": LossSpec.l2,
        "logcosh": LossSpec.logcosh,
        "cauchy": LossSpec.cauchy,
        "rank": LossSpec.rank,
    }[name]()


def _scale(text):
    if text is None or text == "mad":
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError("--scale must be 'mad' or a positive number") from None


def _coef_dict(beta, names):
    out = {"beta_0": float(beta[0])}
    if len(names) == 1:
        out["beta_1"] = float(beta[1])
    else:
        for name, b in zip(names, beta[1:]):
            out[f"beta[{name}]"] = float(b)
    return out


def _fit_dataset(ds, spec, scale=None):
    if ds.p == 0 and spec.kind.value != "rank" and scale is None:
        return fit_location(ds.y, spec)
    return fit_linear(ds.regression(), spec, scale=scale)


def _fit_payload(ds, res):
    if ds.p == 0:
        payload = {"theta_hat": float(res.beta[0])}
    else:
        payload = _coef_dict(res.beta, ds.column_names)
    payload.update(
        objective=float(res.objective),
        converged=bool(res.converged),
        iterations=int(res.iterations),
        gradient_norm=float(res.gradient_norm),
    )
    if res.scale is not None:
        payload["scale"] = float(res.scale)
    return payload


# ----------------------------------------------------------------- commands


def cmd_dist(args) -> Report:
    kind = Kind(args.kind)
    if kind is Kind.SKEWED_COSH:
        if args.tau is None:
            raise UsageError("--kind skewed needs --tau")
        spec = DistSpec.skewed(args.tau, args.theta, args.sigma)
    else:
        if args.tau is not None:
            raise UsageError("--tau applies to --kind skewed only")
        spec = DistSpec(kind, LocationScale(args.theta, args.sigma))
    if args.sample is not None and args.seed is None:
        raise UsageError("--sample needs --seed")
    asked = [args.at is not None, args.inv is not None, args.sample is not None, args.moments, args.kappa, args.fisher]
    if not any(asked):
        raise UsageError("nothing requested: use --at, --inv, --sample, --moments, --kappa or --fisher")
    inputs = {"kind": kind.value, "theta": args.theta, "sigma": args.sigma}
    if args.tau is not None:
        inputs["tau"] = args.tau
    results = {}
    if args.at is not None:
        inputs["at"] = args.at
        results["pdf"] = pdf(spec, args.at)
        results["cdf"] = cdf(spec, args.at)
    if args.inv is not None:
        inputs["inv"] = args.inv
        if not 0 < args.inv < 1:
            raise UsageError("--inv needs 0 < u < 1")
        results["inv_cdf"] = inv_cdf(spec, args.inv)
    if args.sample is not None:
        if args.sample < 1:
            raise UsageError("--sample needs n >= 1")
        inputs.update(sample=args.sample, seed=args.seed)
        results["sample"] = sample(spec, args.sample, args.seed)
    if args.moments:
        m = moments(spec)
        results["mean"] = m.mean
        results["variance"] = m.variance
    if args.kappa:
        if kind is not Kind.SKEWED_COSH:
            raise UsageError("--kappa needs --kind skewed")
        results["kappa"] = kappa(args.tau)
    if args.fisher:
        if kind not in (Kind.COSH, Kind.SKEWED_COSH):
            raise UsageError("--fisher is available for cosh and skewed")
        results["fisher_information"] = fisher_information(spec)
    return Report("dist", inputs, results)


def cmd_fit(args) -> Report:
    ds = _dataset(args)
    spec = _loss(args)
    scale = _scale(args.scale)
    res = _fit_dataset(ds, spec, scale)
    inputs = {"data": args.data, "response": ds.response, "loss": spec.kind.value, **spec.params()}
    if scale is not None:
        inputs["scale"] = scale
    report = Report("fit", inputs, _fit_payload(ds, res))
    if not res.converged:
        raise NotConverged(report)
    return report


def cmd_quantile(args) -> Report:
    ds = _dataset(args)
    taus = _taus(args.taus)
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise UsageError("taus must be increasing")
    reg = ds.regression()
    qf = fit_quantiles(reg, taus, c=args.c, h=args.h, s=args.s, v=args.v)
    fits = {}
    for t, f in zip(taus, qf.fits):
        fits[f"tau={t:g}"] = {**_coef_dict(f.beta, ds.column_names), "converged": bool(f.converged)}
    results = {"fits": fits}
    if args.audit:
        rep = monotonicity_audit(qf, reg)
        results["audit"] = {
            "taus": rep.taus,
            "below_fraction": rep.below_fraction,
            "violations": rep.violations,
        }
    inputs = {"data": args.data, "response": ds.response, "taus": taus, "c": args.c, "h": args.h, "s": args.s, "v": args.v}
    report = Report("quantile", inputs, results)
    if not all(f.converged for f in qf.fits):
        raise NotConverged(report)
    return report


def _table1_row(theta, sigma, n, reps, seed, alpha=0.05):
    rep = parametric_bootstrap(DistSpec.cosh(theta, sigma), n, reps, seed, alpha)
    s = rep.summary
    return {
        "theta": theta,
        "sigma": sigma,
        "theta_hat": s["mean_theta_hat"],
        "n_var_theta_hat": s["n_var_theta_hat"],
        "sigma_hat": s["mean_sigma_hat"],
        "asymptotic_n_var": s["asymptotic_n_var"],
        "se_theta_hat": float(rep.se[0]),
        "ci_theta_hat": [float(rep.ci_lower[0]), float(rep.ci_upper[0])],
        "failures": rep.failures,
    }


def cmd_bootstrap(args) -> Report:
    if args.reps is None or args.reps < 1:
        raise UsageError("--reps must be a positive integer")
    if args.seed is None:
        raise UsageError("--seed is required")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.parametric:
        if args.data:
            raise UsageError("--parametric and --data are exclusive")
        if args.sigma <= 0 or args.n < 2:
            raise UsageError("--parametric needs --sigma > 0 and --n >= 2")
        inputs = {"parametric": True, "theta": args.theta, "sigma": args.sigma, "n": args.n, "reps": args.reps,
                  "seed": args.seed, "alpha": args.alpha}
        results = _table1_row(args.theta, args.sigma, args.n, args.reps, args.seed, args.alpha)
        results["analytic_ci"] = list(confidence_interval(args.theta, args.sigma, args.n, args.alpha))
        return Report("bootstrap", inputs, results)
    if not args.data:
        raise UsageError("give --parametric or --data")
    ds = _dataset(args)
    spec = _loss(args)
    scale = _scale(args.scale)
    target = ds.y if (ds.p == 0 and scale is None) else ds.regression()
    rep = bootstrap_se(target, spec, args.reps, args.seed, args.alpha, scheme=args.scheme, scale=scale)
    names = ["theta_hat"] if ds.p == 0 else ["beta_0", *(ds.column_names if ds.p > 1 else ["beta_1"])]
    results = {}
    for k, name in enumerate(names):
        results[name] = {
            "estimate": float(rep.point[k]),
            "se": float(rep.se[k]),
            "ci": [float(rep.ci_lower[k]), float(rep.ci_upper[k])],
        }
    results["failures"] = rep.failures
    inputs = {"data": args.data, "loss": spec.kind.value, **spec.params(), "reps": args.reps, "seed": args.seed,
              "alpha": args.alpha, "scheme": args.scheme}
    if scale is not None:
        inputs["scale"] = scale
    return Report("bootstrap", inputs, results)


def _gof(ds, fit_loss, dist):
    res = _fit_dataset(ds, fit_loss)
    resid = ds.y - ds.regression().design @ res.beta if ds.p else ds.y - res.beta[0]
    g = ks_test(resid, dist)
    return {
        "D": g.statistic_D,
        "p_value": g.p_value,
        "theta": g.fitted.theta,
        "sigma": g.fitted.sigma,
        "n": g.n,
        "reject_at_0.05": bool(g.p_value < 0.05),
    }


def cmd_gof(args) -> Report:
    ds = _dataset(args)
    spec = {"l2": LossSpec.l2, "logcosh": LossSpec.logcosh}[args.fit_loss]()
    dists = [args.dist] if args.dist != "all" else ["gaussian", "cauchy", "cosh"]
    results = {d: _gof(ds, spec, d) for d in dists}
    if len(dists) == 1:
        results = results[dists[0]]
    results["note"] = "parameters fitted by MLE; classical Kolmogorov p-value (no Lilliefors correction)"
    return Report("gof", {"data": args.data, "fit_loss": args.fit_loss, "dist": args.dist}, results)


def _grid(args):
    if args.points < 2 or not args.xmax > args.xmin:
        raise UsageError("need --points >= 2 and --xmax > --xmin")
    return np.linspace(args.xmin, args.xmax, args.points)


def plot_series(args):
    """Return rows (x, value, series) for the requested figure."""
    fig = args.figure
    rows = []

    def add(xs, ys, label):
        rows.extend((float(a), float(b), label) for a, b in zip(xs, ys))

    if fig in ("loss-curves", "psi-curves"):
        x = _grid(args)
        f = rho if fig == "loss-curves" else psi
        if fig == "loss-curves":
            add(x, np.abs(x), "L1")
        else:
            add(x, np.sign(x), "L1")
        add(x, f(LossSpec.l2(), x), "L2")
        add(x, f(LossSpec.logcosh(), x), "logcosh")
        add(x, f(LossSpec.cauchy(), x), "cauchy")
        if args.delta is not None:
            add(x, f(LossSpec.huber(args.delta), x), f"huber(delta={args.delta:g})")
    elif fig == "pdfs":
        x = _grid(args)
        for kind in (Kind.COSH, Kind.GAUSSIAN, Kind.CAUCHY):
            add(x, pdf(DistSpec(kind), x), kind.value)
        if args.taus is not None:
            for t in _taus(args.taus):
                add(x, pdf(DistSpec.skewed(t), x), f"skewed(tau={t:g})")
    elif fig == "check":
        x = _grid(args)
        for t in _taus(args.taus if args.taus is not None else "0.1,0.25,0.5,0.75,0.9"):
            add(x, rho(LossSpec.check(t), x), f"tau={t:g}")
    elif fig == "smrq":
        x = _grid(args)
        for t in _taus(args.taus if args.taus is not None else "0.5,0.7"):
            spec = LossSpec.smrq(t, c=args.c, h=args.h, s=args.s, v=args.v)
            add(x, rho(spec, x), f"tau={t:g},c={args.c:g},v={args.v:g}")
    elif fig == "qq":
        if args.seed is None or args.n < 2:
            raise UsageError("--figure qq needs --seed and --n >= 2")
        xs = np.sort(sample(DistSpec.cosh(), args.n, args.seed))
        q = special.ndtri((np.arange(1, args.n + 1) - 0.5) / args.n)
        add(q, xs, "qq")
    return rows


def cmd_plotdata(args) -> Report:
    rows = plot_series(args)
    out = Path(args.out)
    try:
        with out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "value", "series"])
            for x, v, s in rows:
                w.writerow([repr(x), repr(v), s])
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None
    labels = list(dict.fromkeys(s for _, _, s in rows))
    return Report("plotdata", {"figure": args.figure, "out": str(out)}, {"series": labels, "rows": len(rows)})


KAPPA_CLOSED = {
    0.0: math.pi * math.sqrt(2.0),
    0.25: math.pi * math.sqrt(4.0 - 2.0 * math.sqrt(2.0)),
    0.5: math.pi,
    0.75: math.pi * math.sqrt(4.0 - 2.0 * math.sqrt(2.0)),
    1.0: math.pi * math.sqrt(2.0),
}

TABLE1 = [(0.0, 1.0), (0.0, 3.0), (5.0, 2.0), (5.0, 3.0)]


def cmd_repro(args) -> Report:
    results = {}
    results["table_location_scale_bootstrap"] = {
        f"theta={th:g},sigma={s:g}": _table1_row(th, s, 100, args.reps_parametric, args.seed)
        for th, s in TABLE1
    }
    loc = datasets.builtin("location25")
    t3 = {}
    for name, spec in (("LSE", LossSpec.l2()), ("Cosh", LossSpec.logcosh()), ("Cauchy", LossSpec.cauchy())):
        fit = fit_location(loc.y, spec)
        rep = bootstrap_se(loc.y, spec, args.reps, args.seed)
        t3[name] = {"theta_hat": float(fit.beta[0]), "se_theta_hat": float(rep.se[0])}
    results["table_location_problem"] = t3
    tel = datasets.builtin("telephone")
    t6 = {}
    for name, spec in (
        ("least squares", LossSpec.l2()),
        ("log-cosh", LossSpec.logcosh()),
        ("rank-based", LossSpec.rank()),
        ("Huber (delta=0.1)", LossSpec.huber(0.1)),
    ):
        fit = fit_linear(tel.regression(), spec)
        t6[name] = {"beta_1": float(fit.beta[1]), "beta_0": float(fit.beta[0]), "converged": bool(fit.converged)}
    results["table_telephone_regression"] = t6
    results["table_kappa"] = {
        f"tau={t:g}": {"kappa": kappa(t), "closed_form": k, "abs_error": abs(kappa(t) - k)} for t, k in KAPPA_CLOSED.items()
    }
    results["gof_telephone_lse_residuals"] = {d: _gof(tel, LossSpec.l2(), d) for d in ("gaussian", "cauchy", "cosh")}
    inputs = {"seed": args.seed, "reps": args.reps, "reps_parametric": args.reps_parametric}
    return Report("repro", inputs, results)


# ------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="logcosh", description="Log-cosh robust estimation toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--json", metavar="PATH", help="also write the report as JSON")

    def data_args(sp, loss=True):
        sp.add_argument("--data", help=f"builtin name ({', '.join(datasets.available())}) or CSV path")
        sp.add_argument("--response", help="response column for CSV data")
        if loss:
            sp.add_argument("--loss", choices=["l2", "logcosh", "huber", "cauchy", "rank"], default="logcosh")
            sp.add_argument("--delta", type=float, help="Huber threshold")
            sp.add_argument("--scale", help="residual scale: a number, or 'mad' to re-estimate it (regression only)")

    d = sub.add_parser("dist", help="densities, quantiles, samples, moments, kappa")
    d.add_argument("--kind", choices=[k.value for k in Kind], required=True)
    d.add_argument("--theta", type=float, default=0.0)
    d.add_argument("--sigma", type=float, default=1.0)
    d.add_argument("--tau", type=float)
    d.add_argument("--at", type=float, metavar="X")
    d.add_argument("--inv", type=float, metavar="U")
    d.add_argument("--sample", type=int, metavar="N")
    d.add_argument("--seed", type=int)
    d.add_argument("--moments", action="store_true")
    d.add_argument("--kappa", action="store_true")
    d.add_argument("--fisher", action="store_true")
    common(d)

    f = sub.add_parser("fit", help="location or linear M-estimation")
    data_args(f)
    common(f)

    q = sub.add_parser("quantile", help="SMRQ quantile regression")
    data_args(q, loss=False)
    q.add_argument("--taus", required=True, help="comma-separated, increasing")
    q.add_argument("--c", type=float, default=0.5)
    q.add_argument("--h", type=float, default=0.0)
    q.add_argument("--s", type=float, default=0.5)
    q.add_argument("--v", type=float, default=0.5)
    q.add_argument("--audit", action="store_true", help="report below-fractions and crossing count")
    common(q)

    b = sub.add_parser("bootstrap", help="parametric or nonparametric bootstrap")
    b.add_argument("--parametric", action="store_true")
    b.add_argument("--theta", type=float, default=0.0)
    b.add_argument("--sigma", type=float, default=1.0)
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--reps", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--scheme", choices=["cases", "residuals"], default="cases")
    data_args(b)
    common(b)

    g = sub.add_parser("gof", help="K-S goodness of fit of regression residuals")
    data_args(g, loss=False)
    g.add_argument("--fit-loss", choices=["l2", "logcosh"], default="l2")
    g.add_argument("--dist", choices=["gaussian", "cauchy", "cosh", "all"], default="all")
    common(g)

    pd_ = sub.add_parser("plotdata", help="write x/value/series CSV for curves and Q-Q pairs")
    pd_.add_argument("--figure", choices=["loss-curves", "psi-curves", "pdfs", "check", "smrq", "qq"], required=True)
    pd_.add_argument("--out", required=True)
    pd_.add_argument("--taus")
    pd_.add_argument("--xmin", type=float, default=-5.0)
    pd_.add_argument("--xmax", type=float, default=5.0)
    pd_.add_argument("--points", type=int, default=201)
    pd_.add_argument("--delta", type=float)
    pd_.add_argument("--c", type=float, default=0.5)
    pd_.add_argument("--h", type=float, default=0.0)
    pd_.add_argument("--s", type=float, default=0.5)
    pd_.add_argument("--v", type=float, default=0.5)
    pd_.add_argument("--n", type=int, default=200)
    pd_.add_argument("--seed", type=int)
    common(pd_)

    r = sub.add_parser("repro", help="regenerate all reference tables in one report")
    r.add_argument("--seed", type=int, default=2024)
    r.add_argument("--reps", type=int, default=2000, help="nonparametric bootstrap replicates")
    r.add_argument("--reps-parametric", type=int, default=10000)
    common(r)
    return p


COMMANDS = {
    "dist": cmd_dist,
    "fit": cmd_fit,
    "quantile": cmd_quantile,
    "bootstrap": cmd_bootstrap,
    "gof": cmd_gof,
    "plotdata": cmd_plotdata,
    "repro": cmd_repro,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = COMMANDS[args.command](args)
    except NotConverged as exc:
        emit(exc.report, args.json)
        print("error: solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (UsageError, datasets.DataError, SingularDesignError, BootstrapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    emit(report, args.json)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
