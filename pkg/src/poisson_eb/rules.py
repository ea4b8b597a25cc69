"""Empirical-Bayes decision rules for Poisson means.

Every rule maps an observed count y to an estimate of the underlying mean.
The frequency-ratio (Robbins-type) rules plug the empirical counts N(y) into
the posterior-mean identity theta(y) = (y+1) f(y+1) / f(y):

* plain:      (y+1) N(y+1) / N(y)          (unstable: can divide by zero)
* add-one:    (y+1) N(y+1) / (N(y) + 1)    (never blows up)
* truncated:  add-one for y <= y0, the identity y beyond

The mixture-based rule evaluates the same identity under a fitted mixing
distribution, with the denominator floored at rho and the estimate clamped
at zero:

    (y+1) * ((f(y+1) - f(y)) / max(f(y), rho) + 1),   y <= y0;   y otherwise.

`tune_defaults` provides the truncation/regularization schedule as a function
of the sample size and the assumed finite p-th moment of the mean
distribution (only meaningful for p > 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, UnsupportedRegimeError
from .mixtures import (
    DiscretePrior,
    MixturePmf,
    pmf_on_range,
    posterior_mean_table,
)
from .npmle import CountHistogram, NpmleFit

__all__ = [
    "ESTIMATOR_KINDS",
    "CLI_KIND_NAMES",
    "EstimatorConfig",
    "RobbinsEstimate",
    "robbins",
    "robbins_truncated",
    "npmle_eb",
    "FittedRule",
    "fit_rule",
    "TunedDefaults",
    "tune_defaults",
    "centered_bayes_diagnostic",
]

ESTIMATOR_KINDS = ("oracle", "robbins_plain", "robbins_addone", "robbins_trunc", "npmle_eb")

# mapping used by the command-line interface and plan files
CLI_KIND_NAMES = {
    "oracle": "oracle",
    "robbins": "robbins_plain",
    "robbins-addone": "robbins_addone",
    "robbins-trunc": "robbins_trunc",
    "npmle": "npmle_eb",
}


@dataclass(frozen=True)
class EstimatorConfig:
    """Which rule to use and its truncation/regularization knobs.

    y0 may be 0 (truncate everywhere except y=0) up to infinity (never
    truncate); rho is the pmf floor of the mixture-based rule; npmle_tol is
    passed through to the solver when a fit is made on the fly.
    """

    kind: str
    y0: float = math.inf
    rho: float = 1e-6
    npmle_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.kind not in ESTIMATOR_KINDS:
            raise InvalidInputError(
                f"unknown estimator kind {self.kind!r}; choose from {ESTIMATOR_KINDS}"
            )
        if self.y0 != math.inf:
            if self.y0 < 0 or int(self.y0) != self.y0:
                raise InvalidInputError("y0 must be a nonnegative integer or inf")
        if not (0 < self.rho <= 1 / math.e):
            raise InvalidInputError("rho must lie in (0, 1/e]")
        if not (0 < self.npmle_tol < 1):
            raise InvalidInputError("npmle_tol must lie in (0, 1)")

    @property
    def cli_name(self) -> str:
        return {v: k for k, v in CLI_KIND_NAMES.items()}[self.kind]


class RobbinsEstimate(NamedTuple):
    """A frequency-ratio estimate plus its hazard flag (None when clean)."""

    value: float
    flag: str | None


def robbins(data: CountHistogram, y: int, addone: bool = False) -> RobbinsEstimate:
    """Plain or add-one frequency-ratio estimate at y.

    Plain version hazards: N(y) = 0 with N(y+1) > 0 gives an infinite
    estimate (flag "infinite"); 0/0 returns 0 with flag "degenerate".
    """
    y = int(y)
    if y < 0:
        raise InvalidInputError("y must be >= 0")
    top = (y + 1) * data.count_of(y + 1)
    bot = data.count_of(y)
    if addone:
        return RobbinsEstimate(top / (bot + 1), None)
    if bot == 0:
        if top == 0:
            return RobbinsEstimate(0.0, "degenerate")
        return RobbinsEstimate(math.inf, "infinite")
    return RobbinsEstimate(top / bot, None)


def robbins_truncated(data: CountHistogram, y: int, y0: float) -> float:
    """Add-one frequency ratio below the truncation level, identity beyond."""
    y = int(y)
    if y < 0:
        raise InvalidInputError("y must be >= 0")
    if not (y0 >= 0):
        raise InvalidInputError("y0 must be >= 0")
    if y > y0:
        return float(y)
    return robbins(data, y, addone=True).value


def npmle_eb(fit, y: int, y0: float = math.inf, rho: float = 1e-6) -> float:
    """Regularized mixture-based rule at y, given a fitted mixing distribution.

    `fit` may be an NpmleFit or a bare DiscretePrior.  Below the truncation
    level the estimate is (y+1)((f(y+1)-f(y))/max(f(y), rho) + 1) clamped at
    zero; beyond it, the identity y.
    """
    prior = fit.prior if isinstance(fit, NpmleFit) else fit
    if not isinstance(prior, DiscretePrior):
        raise InvalidInputError("fit must be an NpmleFit or DiscretePrior")
    y = int(y)
    if y < 0:
        raise InvalidInputError("y must be >= 0")
    if not (0 < rho <= 1 / math.e):
        raise InvalidInputError("rho must lie in (0, 1/e]")
    if y > y0:
        return float(y)
    f = pmf_on_range(prior, y + 1)
    est = (y + 1) * ((f[y + 1] - f[y]) / max(f[y], rho) + 1.0)
    return max(est, 0.0)


# ---------------------------------------------------------------------------
# tabulated rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FittedRule:
    """A rule tabulated on y = 0..y_cap, with provenance and hazard flags."""

    config: EstimatorConfig
    table: np.ndarray
    provenance: str
    flags: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=float)
        if table.ndim != 1 or table.size == 0:
            raise InvalidInputError("rule table must be nonempty 1-d")
        if np.any(table < 0) or np.any(np.isnan(table)):
            raise InvalidInputError("rule estimates must be nonnegative")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def y_cap(self) -> int:
        return self.table.size - 1

    def estimate(self, y: int) -> float:
        if not 0 <= y <= self.y_cap:
            raise InvalidInputError(f"y = {y} outside table range")
        return float(self.table[y])


def _robbins_counts(train: CountHistogram, y_cap: int) -> np.ndarray:
    counts = np.zeros(y_cap + 2)
    inside = train.ys <= y_cap + 1
    counts[train.ys[inside]] = train.cnts[inside]
    return counts


def fit_rule(
    config: EstimatorConfig,
    y_cap: int,
    train: CountHistogram | None = None,
    prior: DiscretePrior | None = None,
    fit: NpmleFit | None = None,
) -> FittedRule:
    """Tabulate a configured rule on y = 0..y_cap.

    Requirements by kind: ``oracle`` needs `prior` (the true mixing
    distribution); the frequency-ratio kinds need `train`; ``npmle_eb`` needs
    `fit` (an NpmleFit or DiscretePrior).  The truncation contract is
    enforced here: entries beyond y0 are exactly y.
    """
    if y_cap < 0:
        raise InvalidInputError("y_cap must be >= 0")
    ys = np.arange(y_cap + 1, dtype=float)
    flags: dict = {}

    if config.kind == "oracle":
        if prior is None:
            raise InvalidInputError("oracle rule needs the true prior")
        table = posterior_mean_table(prior, y_cap)
        provenance = f"oracle({prior.describe()})"

    elif config.kind in ("robbins_plain", "robbins_addone", "robbins_trunc"):
        if train is None:
            raise InvalidInputError("frequency-ratio rules need training counts")
        counts = _robbins_counts(train, y_cap)
        top = (ys + 1.0) * counts[1:]
        bot = counts[:-1]
        if config.kind == "robbins_plain":
            with np.errstate(divide="ignore", invalid="ignore"):
                table = top / bot
            degenerate = (bot == 0) & (top == 0)
            infinite = (bot == 0) & (top > 0)
            table[degenerate] = 0.0
            flags = {
                "degenerate": int(degenerate.sum()),
                "infinite": int(infinite.sum()),
            }
        else:
            table = top / (bot + 1.0)
            if config.kind == "robbins_trunc":
                table = np.where(ys > config.y0, ys, table)
        provenance = f"{config.kind}(n_train={train.n})"

    elif config.kind == "npmle_eb":
        src = fit.prior if isinstance(fit, NpmleFit) else fit
        if not isinstance(src, DiscretePrior):
            raise InvalidInputError("npmle_eb rule needs a fit or prior")
        f = pmf_on_range(src, y_cap + 1)
        table = (ys + 1.0) * ((f[1:] - f[:-1]) / np.maximum(f[:-1], config.rho) + 1.0)
        table = np.maximum(table, 0.0)
        table = np.where(ys > config.y0, ys, table)
        provenance = f"npmle_eb({src.describe()}, rho={config.rho:g})"
        if isinstance(fit, NpmleFit):
            provenance += f", kkt_gap={fit.kkt_gap:.2e}"
            if not fit.converged:
                flags["solver_not_converged"] = 1

    else:  # pragma: no cover - kinds validated in EstimatorConfig
        raise InvalidInputError(f"unknown kind {config.kind!r}")

    return FittedRule(config=config, table=table, provenance=provenance, flags=flags)


# ---------------------------------------------------------------------------
# tuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TunedDefaults:
    """Truncation and regularization schedule for a given (n, p, m_p)."""

    npmle_y0: int
    npmle_rho: float
    robbins_y0: int


def tune_defaults(n: int, p: float, m_p: float = 1.0, c: float = 1.0) -> TunedDefaults:
    """Rate-optimal tuning for the truncated rules.

    For the mixture-based rule: rho = n^{-10} and
    y0 = ceil(c (n m_p)^{2/(2p+1)}); for the truncated frequency-ratio rule:
    y0 = ceil(c (n / (log n)^3)^{1/(p+2)}).  Only supported for p > 1 (below
    that no truncation level rescues the frequency-ratio rule).
    """
    n = int(n)
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    if not (m_p > 0):
        raise InvalidInputError("m_p must be positive")
    if not (c > 0):
        raise InvalidInputError("c must be positive")
    if not (p > 1):
        raise UnsupportedRegimeError(
            f"tuning requires p > 1 (got p = {p}); no supported schedule below"
        )
    npmle_rho = float(n) ** -10.0
    npmle_y0 = math.ceil(c * (n ** (2.0 / (2.0 * p + 1.0))) * (m_p ** (2.0 / (2.0 * p + 1.0))))
    robbins_y0 = math.ceil(c * (n / math.log(n) ** 3) ** (1.0 / (p + 2.0)))
    return TunedDefaults(npmle_y0=npmle_y0, npmle_rho=npmle_rho, robbins_y0=robbins_y0)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def centered_bayes_diagnostic(pmf: MixturePmf) -> float:
    """max_y |theta_G(y) - y| / (sqrt(y v 1) * log(1/f_G(y))).

    Scanned over the cells with f_G(y) >= 1e-12 (and log(1/f) bounded away
    from zero, which excludes only near-deterministic cells where the
    numerator vanishes as well).  Values staying below ~10 are the expected
    regime; larger values indicate a posterior mean drifting anomalously far
    from the observation.
    """
    f = pmf.values
    if f.size < 2:
        raise InvalidInputError("pmf table too short")
    ys = np.arange(f.size - 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = (ys + 1.0) * f[1:] / f[:-1]
        log_inv = -np.log(f[:-1])
        ratio = np.abs(theta - ys) / (np.sqrt(np.maximum(ys, 1.0)) * log_inv)
    ok = (f[:-1] >= 1e-12) & (log_inv > 1e-6)
    if not np.any(ok):
        raise InvalidInputError("no cells pass the mass threshold")
    return float(np.max(ratio[ok]))
