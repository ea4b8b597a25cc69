"""Monte Carlo harness: density risk, regret metrics, rate fits, CSV reports.

A plan names a prior, a sample-size grid, replicate count, estimators, and
metrics.  Running it produces one row per (n, replicate, method, metric) in a
deterministic fold order, with all randomness drawn from counter-based
streams keyed by (plan seed, n, replicate, purpose) — so reruns are
byte-identical and rows never depend on execution order.

Conventions
-----------
* Individual regret E(rule(Y) - theta_G(Y))^2 is computed by *exact*
  summation over y against the certified reference mixture: the training
  sample (size n-1, matching the leave-one-out convention) is random, the
  test variable is integrated out.  Mass beyond the working cap y_cap is
  summed separately and reported in the std_error column as a deterministic
  tail term.
* Total regret is n times individual regret; plans may additionally enable
  the direct leave-one-out path sum_i (rule_{-i}(Y_i) - theta_i)^2 - n mmse,
  whose agreement with the first path is a standing consistency check.
* Infinite plain-Robbins estimates contribute squared error capped at 1e12
  and are counted in the row's flags.
"""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .errors import InvalidInputError, UnsupportedRegimeError
from .mixtures import hellinger_sq, pmf_table
from .npmle import CountHistogram, fit_npmle
from .priors import PriorSpec, ResolvedPrior, parse_prior_spec, resolve
from .rules import (
    CLI_KIND_NAMES,
    EstimatorConfig,
    FittedRule,
    fit_rule,
    npmle_eb,
    robbins,
    robbins_truncated,
    tune_defaults,
)

__all__ = [
    "METRICS",
    "ExperimentPlan",
    "ExperimentRow",
    "RateFit",
    "ExperimentReport",
    "parse_plan",
    "density_risk_trial",
    "individual_regret_trial",
    "total_regret_trial",
    "robbins_instability_probe",
    "fit_rate",
    "run_plan",
]

METRICS = ("hellinger_sq", "individual_regret", "total_regret")

SQERR_CAP = 1e12


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    """Everything a sweep needs, in one reproducible record."""

    prior: PriorSpec
    p: float
    n_grid: tuple
    replicates: int
    methods: tuple = ()
    metrics: tuple = ("individual_regret",)
    seed: int = 0
    name: str = "plan"
    disc_tol: float = 1e-6
    tuning_c: float = 1.0
    direct_total: bool = False
    solver_tol: float = 1e-6
    solver_max_iter: int = 10_000
    grid_density: float = 4.0
    y_cap_eps: float = 1e-9
    overrides: dict = field(default_factory=dict)  # npmle_y0 / npmle_rho / robbins_y0

    def __post_init__(self) -> None:
        if not self.n_grid or list(self.n_grid) != sorted(set(int(n) for n in self.n_grid)):
            raise InvalidInputError("n_grid must be ascending distinct sample sizes")
        if any(int(n) < 10 for n in self.n_grid):
            raise InvalidInputError("sample sizes below 10 are not meaningful here")
        if self.replicates < 1:
            raise InvalidInputError("replicates must be >= 1")
        for m in self.metrics:
            if m not in METRICS:
                raise InvalidInputError(f"unknown metric {m!r}; choose from {METRICS}")
        for meth in self.methods:
            if meth not in CLI_KIND_NAMES:
                raise InvalidInputError(
                    f"unknown method {meth!r}; choose from {tuple(CLI_KIND_NAMES)}"
                )
        needs_rules = {"individual_regret", "total_regret"} & set(self.metrics)
        if needs_rules and not self.methods:
            raise InvalidInputError("regret metrics need at least one method")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "metrics", tuple(self.metrics))


_PLAN_KEYS = {
    "name": str,
    "prior": str,
    "p": float,
    "n_grid": str,
    "replicates": int,
    "methods": str,
    "metrics": str,
    "seed": int,
    "disc_tol": float,
    "tuning_c": float,
    "direct_total": int,
    "solver_tol": float,
    "solver_max_iter": int,
    "grid_density": float,
    "y_cap_eps": float,
    "npmle_y0": int,
    "npmle_rho": float,
    "robbins_y0": int,
}


def parse_plan(text: str) -> ExperimentPlan:
    """Parse a key=value plan file (one pair per line, # comments allowed).

    Example::

        name = rate_p2
        prior = family=heavy_tail p=2
        p = 2
        n_grid = 1000,3162,10000
        replicates = 50
        methods = robbins-trunc,npmle
        metrics = individual_regret
        seed = 7
    """
    raw: dict = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"plan lines must be key = value (got {line!r})")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _PLAN_KEYS:
            raise InvalidInputError(f"unknown plan key {key!r}")
        raw[key] = _PLAN_KEYS[key](val.strip())
    if "prior" not in raw or "n_grid" not in raw or "replicates" not in raw:
        raise InvalidInputError("plan needs at least prior, n_grid, replicates")
    overrides = {
        k: raw.pop(k) for k in ("npmle_y0", "npmle_rho", "robbins_y0") if k in raw
    }
    prior = parse_prior_spec(raw.pop("prior"))
    n_grid = tuple(int(tok) for tok in raw.pop("n_grid").split(","))
    methods = tuple(tok.strip() for tok in raw.pop("methods", "").split(",") if tok.strip())
    metrics = tuple(
        tok.strip() for tok in raw.pop("metrics", "individual_regret").split(",") if tok.strip()
    )
    p = raw.pop("p", float(prior.params.get("p", 1.0)))
    return ExperimentPlan(
        prior=prior,
        p=p,
        n_grid=n_grid,
        methods=methods,
        metrics=metrics,
        direct_total=bool(raw.pop("direct_total", 0)),
        overrides=overrides,
        **raw,
    )


# ---------------------------------------------------------------------------
# rows and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentRow:
    n: int
    replicate: int
    method: str
    metric: str
    value: float
    std_error: float
    flags: str = ""


@dataclass(frozen=True)
class RateFit:
    method: str
    metric: str
    slope: float
    ci_lo: float
    ci_hi: float
    n_points: int


@dataclass(eq=False)
class ExperimentReport:
    plan: ExperimentPlan
    rows: list
    slopes: list
    runtime_seconds: float  # in-memory only; never serialized (reruns stay byte-identical)
    version: str = __version__

    def header_lines(self) -> list[str]:
        cfg = (
            f"prior={self.plan.prior.describe()} p={self.plan.p:g} "
            f"n_grid={','.join(str(n) for n in self.plan.n_grid)} "
            f"replicates={self.plan.replicates} seed={self.plan.seed} "
            f"methods={','.join(self.plan.methods) or '-'} "
            f"metrics={','.join(self.plan.metrics)} "
            f"tuning_c={self.plan.tuning_c:g} disc_tol={self.plan.disc_tol:g}"
        )
        return [
            f"# poisson_eb {self.version} experiment report",
            f"# plan {self.plan.name}: {cfg}",
        ]

    def rows_csv(self) -> str:
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "replicate", "method", "metric", "value", "std_error", "flags"])
        for r in self.rows:
            w.writerow([r.n, r.replicate, r.method, r.metric, repr(r.value), repr(r.std_error), r.flags])
        return buf.getvalue()

    def slopes_csv(self) -> str:
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "slope", "ci_lo", "ci_hi", "n_points"])
        for s in self.slopes:
            w.writerow([s.method, s.metric, repr(s.slope), repr(s.ci_lo), repr(s.ci_hi), s.n_points])
        return buf.getvalue()

    def mean_by_n(self, method: str, metric: str) -> dict:
        acc: dict = {}
        for r in self.rows:
            if r.method == method and r.metric == metric:
                acc.setdefault(r.n, []).append(r.value)
        return {n: float(np.mean(v)) for n, v in sorted(acc.items())}

    def values(self, n: int, method: str, metric: str) -> list:
        return [
            r.value for r in self.rows
            if r.n == n and r.method == method and r.metric == metric
        ]


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

# purpose codes for the per-trial substreams
_PURPOSE_DENSITY = 0
_PURPOSE_TRAIN = 1
_PURPOSE_DIRECT = 2


def _stream_key(plan_seed: int, n: int, replicate: int, purpose: int) -> tuple:
    return (int(plan_seed), int(n), int(replicate), int(purpose))


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

def density_risk_trial(
    resolved: ResolvedPrior,
    n: int,
    seed,
    solver_tol: float = 1e-6,
    solver_max_iter: int = 10_000,
    grid_density: float = 4.0,
) -> tuple[float, list[str]]:
    """Squared Hellinger distance of the fitted mixture pmf from the reference.

    Draws n counts, fits the NPMLE (lenient mode), and compares pmf tables on
    a shared certified range.  Returns (H^2, flags).
    """
    if n < 10:
        raise InvalidInputError("n must be >= 10")
    _, y = resolved.sample_counts(seed, n)
    hist = CountHistogram.from_samples(y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_npmle(hist, density=grid_density, tol=solver_tol, max_iter=solver_max_iter)
    ref = resolved.pmf(tail_tol=1e-11)
    fit_table = pmf_table(fit.prior, tail_tol=1e-11, min_len=ref.values.size,
                          source="npmle_fit")
    value = hellinger_sq(fit_table, ref)
    flags = [] if fit.converged else ["solver_not_converged"]
    return value, flags


def _rule_table_full(
    resolved: ResolvedPrior,
    method: str,
    config: EstimatorConfig,
    train: CountHistogram | None,
    y_hi: int,
    solver_tol: float,
    solver_max_iter: int,
    grid_density: float,
) -> FittedRule:
    kind = CLI_KIND_NAMES[method]
    if kind == "oracle":
        return fit_rule(config, y_hi, prior=resolved.discretization)
    if kind == "npmle_eb":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_npmle(train, density=grid_density, tol=config.npmle_tol,
                            max_iter=solver_max_iter)
        return fit_rule(config, y_hi, fit=fit)
    return fit_rule(config, y_hi, train=train)


def _regret_from_table(
    resolved: ResolvedPrior,
    rule: FittedRule,
    y_cap: int,
) -> tuple[float, float, list[str]]:
    ref = resolved.pmf(tail_tol=1e-11)
    y_hi = rule.y_cap
    f = ref.values[: y_hi + 1]
    theta_ref = resolved.oracle_table(y_hi)
    with np.errstate(invalid="ignore"):
        sq = (rule.table - theta_ref) ** 2
    capped = ~np.isfinite(sq)
    sq = np.where(capped, SQERR_CAP, np.minimum(sq, SQERR_CAP))
    value = float(f[: y_cap + 1] @ sq[: y_cap + 1])
    tail_term = float(f[y_cap + 1 :] @ sq[y_cap + 1 : f.size])
    flags = []
    if int(capped[: y_cap + 1].sum()):
        flags.append(f"capped={int(capped[: y_cap + 1].sum())}")
    for k, v in rule.flags.items():
        if v:
            flags.append(f"{k}={v}")
    return value, tail_term, flags


def individual_regret_trial(
    resolved: ResolvedPrior,
    n: int,
    method: str,
    seed,
    config: EstimatorConfig | None = None,
    tuning_c: float = 1.0,
    y_cap_eps: float = 1e-9,
    solver_tol: float = 1e-6,
    solver_max_iter: int = 10_000,
    grid_density: float = 4.0,
    overrides: dict | None = None,
) -> tuple[float, float, list[str]]:
    """E(rule(Y) - theta_G(Y))^2 for one random training sample of size n-1.

    The expectation over the test count is an exact weighted sum against the
    reference mixture up to y_cap (its 1 - y_cap_eps quantile); the remainder
    of the reference table is returned as the deterministic tail term.
    Returns (value, tail_term, flags).
    """
    if n < 10:
        raise InvalidInputError("n must be >= 10")
    if method not in CLI_KIND_NAMES:
        raise InvalidInputError(f"unknown method {method!r}")
    if config is None:
        config = _default_config(resolved, n, method, tuning_c, overrides)
    _, y_train = resolved.sample_counts(seed, n - 1)
    train = CountHistogram.from_samples(y_train)
    y_cap = resolved.quantile_y(y_cap_eps)
    ref = resolved.pmf(tail_tol=1e-11)
    rule = _rule_table_full(
        resolved, method, config, train, ref.y_max, solver_tol, solver_max_iter, grid_density
    )
    return _regret_from_table(resolved, rule, y_cap)


def _default_config(
    resolved: ResolvedPrior,
    n: int,
    method: str,
    tuning_c: float,
    overrides: dict | None,
) -> EstimatorConfig:
    kind = CLI_KIND_NAMES[method]
    overrides = overrides or {}
    if kind in ("oracle", "robbins_plain", "robbins_addone"):
        return EstimatorConfig(kind=kind)
    if kind == "robbins_trunc":
        if "robbins_y0" in overrides:
            return EstimatorConfig(kind=kind, y0=overrides["robbins_y0"])
        tuned = tune_defaults(n, resolved.p, m_p=resolved.p_moment, c=tuning_c)
        return EstimatorConfig(kind=kind, y0=tuned.robbins_y0)
    # npmle_eb: tuned knobs where the moment regime supports them, otherwise
    # the untruncated rule with a tiny density floor (fixed-prior plans often
    # carry p as a mere label).
    y0 = overrides.get("npmle_y0")
    rho = overrides.get("npmle_rho")
    if y0 is None or rho is None:
        try:
            tuned = tune_defaults(n, resolved.p, m_p=resolved.p_moment, c=tuning_c)
            y0 = tuned.npmle_y0 if y0 is None else y0
            rho = max(tuned.npmle_rho, 1e-300) if rho is None else rho
        except UnsupportedRegimeError:
            y0 = math.inf if y0 is None else y0
            rho = 1e-10 if rho is None else rho
    return EstimatorConfig(kind=kind, y0=y0, rho=min(rho, 1.0 / math.e))


def _loo_estimates(
    resolved: ResolvedPrior,
    method: str,
    config: EstimatorConfig,
    hist: CountHistogram,
    solver_tol: float,
    solver_max_iter: int,
    grid_density: float,
) -> tuple[dict, list[str]]:
    """Leave-one-out estimate at each distinct observed y (training = data - that point)."""
    kind = CLI_KIND_NAMES[method]
    flags: list[str] = []
    est: dict = {}
    warm = None
    if kind == "npmle_eb":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            warm = fit_npmle(hist, density=grid_density, tol=config.npmle_tol,
                             max_iter=solver_max_iter)
    for y in hist.ys.tolist():
        train = hist.remove_one(y)
        if kind == "oracle":
            est[y] = float(resolved.oracle_table(y)[y])
        elif kind == "robbins_plain":
            r = robbins(train, y, addone=False)
            est[y] = r.value
            if r.flag:
                flags.append(f"{r.flag}@{y}")
        elif kind == "robbins_addone":
            est[y] = robbins(train, y, addone=True).value
        elif kind == "robbins_trunc":
            est[y] = robbins_truncated(train, y, config.y0)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                refit = fit_npmle(train, grid=warm.grid, tol=config.npmle_tol,
                                  max_iter=solver_max_iter, init_prior=warm.prior)
            if not refit.converged:
                flags.append(f"solver_not_converged@{y}")
            est[y] = npmle_eb(refit, y, y0=config.y0, rho=config.rho)
    return est, flags


def total_regret_trial(
    resolved: ResolvedPrior,
    n: int,
    method: str,
    seed,
    config: EstimatorConfig | None = None,
    direct: bool = False,
    tuning_c: float = 1.0,
    y_cap_eps: float = 1e-9,
    solver_tol: float = 1e-6,
    solver_max_iter: int = 10_000,
    grid_density: float = 4.0,
    overrides: dict | None = None,
) -> dict:
    """Total regret by the product path, optionally also the direct LOO path.

    Product path: n times the individual regret at training size n-1.  Direct
    path: draw (theta_i, Y_i) pairs, estimate each Y_i from the other n-1
    observations, and subtract n times the reference Bayes risk.  The two
    agree in expectation; their standing comparison is a consistency check on
    the whole pipeline.
    """
    if config is None:
        config = _default_config(resolved, n, method, tuning_c, overrides)
    ind, tail, flags = individual_regret_trial(
        resolved, n, method, seed, config=config, tuning_c=tuning_c,
        y_cap_eps=y_cap_eps, solver_tol=solver_tol,
        solver_max_iter=solver_max_iter, grid_density=grid_density,
    )
    out = {
        "value": n * ind,
        "tail_term": n * tail,
        "flags": list(flags),
    }
    if direct:
        seed_t = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
        dval, dflags = _direct_total(
            resolved, n, method, config, tuple(seed_t + [_PURPOSE_DIRECT]),
            solver_tol, solver_max_iter, grid_density,
        )
        out["direct_value"] = dval
        out["direct_flags"] = dflags
    return out


def _direct_total(
    resolved: ResolvedPrior,
    n: int,
    method: str,
    config: EstimatorConfig,
    seed,
    solver_tol: float,
    solver_max_iter: int,
    grid_density: float,
) -> tuple[float, list[str]]:
    """Direct leave-one-out total regret on a fresh (theta_i, Y_i) sample."""
    theta, y = resolved.sample_counts(seed, n)
    hist = CountHistogram.from_samples(y)
    est, dflags = _loo_estimates(
        resolved, method, config, hist, solver_tol, solver_max_iter, grid_density
    )
    est_arr = np.array([est[int(v)] for v in y])
    with np.errstate(invalid="ignore"):
        sq = (est_arr - theta) ** 2
    sq = np.where(np.isfinite(sq), np.minimum(sq, SQERR_CAP), SQERR_CAP)
    mmse_val, _ = resolved.mmse_ref()
    return float(sq.sum() - n * mmse_val), dflags


# ---------------------------------------------------------------------------
# instability probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    n: int
    y_max: int
    gap_sites: int      # y with N(y) = 0 < N(y+1): infinite plain-Robbins cells
    huge_sites: int     # finite estimates exceeding 100 * max(y, 1)


def robbins_instability_probe(resolved: ResolvedPrior, n: int, seed) -> ProbeResult:
    """Census of pathological plain-Robbins cells in one sample of size n."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    _, y = resolved.sample_counts(seed, n)
    hist = CountHistogram.from_samples(y)
    y_max = hist.y_max
    counts = np.zeros(y_max + 2)
    counts[hist.ys] = hist.cnts
    bot, top = counts[:-1], counts[1:]
    ys = np.arange(y_max + 1, dtype=float)
    gaps = int(np.sum((bot == 0) & (top > 0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        est = (ys + 1.0) * top / bot
    finite = np.isfinite(est) & (bot > 0)
    huge = int(np.sum(finite & (est > 100.0 * np.maximum(ys, 1.0))))
    return ProbeResult(n=n, y_max=y_max, gap_sites=gaps, huge_sites=huge)


# ---------------------------------------------------------------------------
# rate fits
# ---------------------------------------------------------------------------

def fit_rate(ns, values, method: str = "", metric: str = "") -> RateFit:
    """OLS slope of log(value) on log(n), with a normal-theory 95% CI.

    Requires >= 4 usable points spanning at least 1.5 decades of n.
    Nonpositive values cannot enter the log fit; they are excluded with a
    warning.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.ndim != 1:
        raise InvalidInputError("ns and values must be matching 1-d arrays")
    ok = values > 0
    if not np.all(ok):
        warnings.warn(
            f"excluding {int((~ok).sum())} nonpositive values from the rate fit",
            RuntimeWarning, stacklevel=2,
        )
    ns, values = ns[ok], values[ok]
    if np.unique(ns).size < 4:
        raise InvalidInputError("rate fit needs >= 4 distinct sample sizes")
    span = math.log10(ns.max() / ns.min())
    if span < 1.5:
        raise InvalidInputError(f"n range spans only {span:.2f} decades (< 1.5)")
    x = np.log(ns)
    z = np.log(values)
    xm = x - x.mean()
    slope = float((xm @ (z - z.mean())) / (xm @ xm))
    intercept = float(z.mean() - slope * x.mean())
    resid = z - (intercept + slope * x)
    dof = max(x.size - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / float(xm @ xm))
    return RateFit(
        method=method, metric=metric, slope=slope,
        ci_lo=slope - 1.96 * se, ci_hi=slope + 1.96 * se,
        n_points=int(np.unique(ns).size),
    )


# ---------------------------------------------------------------------------
# the sweep driver
# ---------------------------------------------------------------------------

def run_plan(plan: ExperimentPlan, resolved: ResolvedPrior | None = None) -> ExperimentReport:
    """Execute a plan: all rows in deterministic (n, replicate, method, metric) order.

    Every scheduled row is produced; trials that fail numerically yield a
    value of NaN with an explanatory flag rather than silently vanishing.
    """
    t0 = time.perf_counter()
    if resolved is None:
        resolved = resolve(plan.prior, p=plan.p, disc_tol=plan.disc_tol, seed=plan.seed)
    rows: list[ExperimentRow] = []

    for n in plan.n_grid:
        for rep in range(plan.replicates):
            if "hellinger_sq" in plan.metrics:
                key = _stream_key(plan.seed, n, rep, _PURPOSE_DENSITY)
                try:
                    value, flags = density_risk_trial(
                        resolved, n, key,
                        solver_tol=plan.solver_tol,
                        solver_max_iter=plan.solver_max_iter,
                        grid_density=plan.grid_density,
                    )
                    rows.append(ExperimentRow(n, rep, "npmle", "hellinger_sq",
                                              value, 0.0, ";".join(flags)))
                except Exception as exc:  # noqa: BLE001 - every row must exist
                    rows.append(ExperimentRow(n, rep, "npmle", "hellinger_sq",
                                              float("nan"), 0.0, f"failed:{type(exc).__name__}"))
            regret_metrics = [m for m in plan.metrics if m != "hellinger_sq"]
            if not regret_metrics:
                continue
            key = _stream_key(plan.seed, n, rep, _PURPOSE_TRAIN)
            for method in plan.methods:
                try:
                    config = _default_config(resolved, n, method, plan.tuning_c, plan.overrides)
                    ind, tail, flags = individual_regret_trial(
                        resolved, n, method, key, config=config,
                        y_cap_eps=plan.y_cap_eps, solver_tol=plan.solver_tol,
                        solver_max_iter=plan.solver_max_iter,
                        grid_density=plan.grid_density,
                    )
                    flag_str = ";".join(flags)
                    if "individual_regret" in regret_metrics:
                        rows.append(ExperimentRow(n, rep, method, "individual_regret",
                                                  ind, tail, flag_str))
                    if "total_regret" in regret_metrics:
                        rows.append(ExperimentRow(n, rep, method, "total_regret",
                                                  n * ind, n * tail, flag_str))
                        if plan.direct_total:
                            dval, dflags = _direct_total(
                                resolved, n, method, config,
                                _stream_key(plan.seed, n, rep, _PURPOSE_DIRECT),
                                plan.solver_tol, plan.solver_max_iter,
                                plan.grid_density,
                            )
                            rows.append(ExperimentRow(
                                n, rep, method, "total_regret_direct",
                                dval, 0.0, ";".join(dflags),
                            ))
                except Exception as exc:  # noqa: BLE001
                    for metric in regret_metrics:
                        rows.append(ExperimentRow(n, rep, method, metric,
                                                  float("nan"), 0.0,
                                                  f"failed:{type(exc).__name__}"))

    slopes: list[RateFit] = []
    eligible = (
        len(plan.n_grid) >= 4
        and math.log10(plan.n_grid[-1] / plan.n_grid[0]) >= 1.5
    )
    if eligible:
        pairs = {(r.method, r.metric) for r in rows if r.metric != "total_regret_direct"}
        acc: dict = {}
        for r in rows:
            acc.setdefault((r.method, r.metric, r.n), []).append(r.value)
        for method, metric in sorted(pairs):
            means = {
                n: float(np.mean(acc[(method, metric, n)]))
                for n in plan.n_grid if (method, metric, n) in acc
            }
            ns = [n for n, v in means.items() if v > 0 and math.isfinite(v)]
            vals = [means[n] for n in ns]
            if len(ns) >= 4:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    try:
                        slopes.append(fit_rate(ns, vals, method=method, metric=metric))
                    except InvalidInputError:
                        pass
    return ExperimentReport(
        plan=plan, rows=rows, slopes=slopes,
        runtime_seconds=time.perf_counter() - t0,
    )
