"""Discrete priors, Poisson mixture pmf tables, and exact mixture functionals.

The objects here are the substrate for everything else in the package: a
mixing distribution with finitely many atoms (`DiscretePrior`), its Poisson
mixture pmf tabulated on ``y = 0..y_max`` with a certified tail bound
(`MixturePmf`), and the exact quantities built from them — the posterior-mean
(Bayes) rule, the Bayes risk, Hellinger/chi-square divergences, and the
probability generating function identity used as a self-check.

Conventions
-----------
* ``Poi(y; theta) = exp(-theta) theta^y / y!``, with ``theta = 0`` meaning a
  unit mass at ``y = 0``.
* pmf tables are truncated at a ``y_max`` chosen from the Poisson deviation
  bound ``P(|X - theta| > t) <= exp(-t^2 / (2(theta + t)))`` applied atom by
  atom, so the neglected tail is provably below the requested tolerance.
* Squared Hellinger distance between pmfs is the *unnormalized* sum
  ``sum_y (sqrt f - sqrt g)^2``, which lives in ``[0, 2]``.  The closed forms
  in :func:`poisson_divergences` use the 1/2-normalized convention in
  ``[0, 1]``; multiply by 2 to land in the unnormalized one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import (
    DegenerateSupportError,
    InvalidInputError,
    TailCoverageError,
)

__all__ = [
    "WEIGHT_FLOOR",
    "DiscretePrior",
    "MixturePmf",
    "log_poisson_pmf",
    "poisson_tail_bound",
    "mixture_tail_bound",
    "pmf_on_range",
    "log_pmf_on_range",
    "pmf_table",
    "bayes_rule",
    "posterior_mean_table",
    "posterior_moment_table",
    "mmse",
    "mmse_exact",
    "hellinger_sq",
    "poisson_divergences",
    "generating_function_check",
]

# Weights below this are dropped at construction time and the rest renormalized.
WEIGHT_FLOOR = 1e-15

_WEIGHT_SUM_TOL = 1e-12
_CHUNK = 4096  # rows per block when tabulating mixtures (memory control)


# ---------------------------------------------------------------------------
# prior
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscretePrior:
    """Finitely supported mixing distribution on [0, inf).

    Atoms are sorted strictly increasing after merging duplicates; weights are
    positive, pruned below :data:`WEIGHT_FLOOR`, and renormalized to sum to 1.
    Construction raises :class:`InvalidInputError` when that cannot be done.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float)).ravel()
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float)).ravel()
        if atoms.size == 0:
            raise InvalidInputError("prior needs at least one atom")
        if atoms.shape != weights.shape:
            raise InvalidInputError("atoms and weights must have equal length")
        if not np.all(np.isfinite(atoms)) or np.any(atoms < 0):
            raise InvalidInputError("atoms must be finite and nonnegative")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidInputError("weights must be finite and nonnegative")

        # merge duplicate atoms, then prune tiny weights and renormalize
        atoms, inverse = np.unique(atoms, return_inverse=True)
        weights = np.bincount(inverse, weights=weights, minlength=atoms.size)
        total = weights.sum()
        if not (total > 0):
            raise InvalidInputError("total prior mass must be positive")
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise InvalidInputError(
                f"weights must sum to 1 within {_WEIGHT_SUM_TOL:g} (got {total!r})"
            )
        weights = weights / total
        keep = weights >= WEIGHT_FLOOR
        if not np.any(keep):
            raise InvalidInputError("all weights fell below the pruning floor")
        atoms, weights = atoms[keep], weights[keep]
        weights = weights / weights.sum()

        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    # -- basic queries ------------------------------------------------------

    @property
    def n_atoms(self) -> int:
        return int(self.atoms.size)

    @property
    def max_atom(self) -> float:
        return float(self.atoms[-1])

    def moment(self, r: float) -> float:
        """E theta^r under the prior, for r >= 0 (0^0 counted as 1)."""
        if r < 0:
            raise InvalidInputError("moment order must be nonnegative")
        return float(self.weights @ self.atoms ** r)

    @property
    def mean(self) -> float:
        return float(self.weights @ self.atoms)

    def describe(self) -> str:
        if self.n_atoms == 1:
            return f"point_mass({self.atoms[0]:g})"
        return f"discrete({self.n_atoms} atoms on [{self.atoms[0]:g}, {self.atoms[-1]:g}])"

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "DiscretePrior":
        try:
            return cls(np.asarray(obj["atoms"]), np.asarray(obj["weights"]))
        except KeyError as exc:
            raise InvalidInputError(f"prior dict missing key {exc}") from exc


# ---------------------------------------------------------------------------
# Poisson pmf and tail machinery
# ---------------------------------------------------------------------------

def log_poisson_pmf(y, theta):
    """log Poi(y; theta), broadcasting, with theta = 0 handled exactly.

    The zero atom gives a unit mass at y = 0 (log pmf 0 there, -inf
    elsewhere), which the generic formula would turn into NaN.
    """
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = y * np.log(theta) - theta - gammaln(y + 1.0)
    if np.any(theta == 0):
        at_zero = np.where(y == 0, 0.0, -np.inf)
        out = np.where(theta == 0, at_zero, out)
    return out


def poisson_tail_bound(theta: float, t: float) -> float:
    """Upper bound exp(-t^2 / (2(theta + t))) on P(+-(X - theta) > t), t > 0."""
    if not (t > 0):
        raise InvalidInputError("deviation t must be positive")
    if not (theta >= 0):
        raise InvalidInputError("theta must be nonnegative")
    return math.exp(-t * t / (2.0 * (theta + t)))


def mixture_tail_bound(prior: DiscretePrior, y: float) -> float:
    """Certified upper bound on P(Y > y) for the Poisson mixture of `prior`.

    Applies the one-sided deviation bound per atom with t = y - theta (atoms
    at or above y contribute their full weight).
    """
    t = y - prior.atoms
    with np.errstate(over="ignore"):
        b = np.where(t > 0, np.exp(-(t * t) / (2.0 * (prior.atoms + t))), 1.0)
    return float(prior.weights @ np.minimum(b, 1.0))


def _y_max_for_tail(prior: DiscretePrior, tail_tol: float) -> int:
    # Solve exp(-t^2/(2(theta+t))) = tail_tol per atom: t = L + sqrt(L^2 + 2 theta L)
    # with L = log(1/tail_tol); then each atom's tail is <= tail_tol, hence so
    # is the mixture's (weights sum to one).
    L = math.log(1.0 / tail_tol)
    t = L + np.sqrt(L * L + 2.0 * prior.atoms * L)
    y_max = int(math.ceil(float(np.max(prior.atoms + t))))
    while mixture_tail_bound(prior, y_max) > tail_tol:  # safety; rarely taken
        y_max += max(1, y_max // 8)
    return y_max


def log_pmf_on_range(prior: DiscretePrior, y_hi: int) -> np.ndarray:
    """log f_G(y) for y = 0..y_hi (inclusive), computed in blocks."""
    if y_hi < 0:
        raise InvalidInputError("y_hi must be >= 0")
    log_w = np.log(prior.weights)
    out = np.empty(y_hi + 1)
    for start in range(0, y_hi + 1, _CHUNK):
        ys = np.arange(start, min(start + _CHUNK, y_hi + 1), dtype=float)
        block = log_poisson_pmf(ys[:, None], prior.atoms[None, :]) + log_w[None, :]
        out[start : start + ys.size] = logsumexp(block, axis=1)
    return out


def pmf_on_range(prior: DiscretePrior, y_hi: int) -> np.ndarray:
    """f_G(y) for y = 0..y_hi (inclusive)."""
    return np.exp(log_pmf_on_range(prior, y_hi))


# ---------------------------------------------------------------------------
# pmf tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MixturePmf:
    """Tabulated mixture pmf on y = 0..y_max with a certified tail bound.

    ``values[y] = f_G(y)``; ``tail_mass`` upper-bounds P(Y > y_max) and is no
    larger than the tolerance the table was built with.  ``source`` records
    where the table came from (for report provenance).
    """

    values: np.ndarray
    tail_mass: float
    source: str = "unknown"
    tail_tol: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInputError("pmf table must be a nonempty 1-d array")
        if np.any(values < 0) or np.any(values > 1) or not np.all(np.isfinite(values)):
            raise InvalidInputError("pmf values must lie in [0, 1]")
        if not (0 <= self.tail_mass <= 1):
            raise InvalidInputError("tail_mass must lie in [0, 1]")
        total = values.sum() + self.tail_mass
        if abs(total - 1.0) > 1e-10:
            raise InvalidInputError(
                f"pmf head + tail must account for all mass (got {total!r})"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def y_max(self) -> int:
        return self.values.size - 1

    def f(self, y: int) -> float:
        if not 0 <= y <= self.y_max:
            raise InvalidInputError(f"y = {y} outside table range 0..{self.y_max}")
        return float(self.values[y])


def pmf_table(
    prior: DiscretePrior,
    tail_tol: float = 1e-10,
    min_len: int | None = None,
    source: str | None = None,
) -> MixturePmf:
    """Tabulate the Poisson mixture pmf of `prior` with tail below `tail_tol`.

    The truncation point comes from the per-atom deviation bound, so
    ``tail_mass <= tail_tol`` is certified, not estimated.  ``min_len`` can
    force a longer table (useful when two tables must share a range).

    Parameters
    ----------
    prior : DiscretePrior
    tail_tol : float in (0, 1)
    min_len : optional minimum table length (y_max >= min_len - 1).
    source : provenance string stored on the table.
    """
    if not isinstance(prior, DiscretePrior):
        raise InvalidInputError("pmf_table expects a DiscretePrior")
    if not (0.0 < tail_tol < 1.0):
        raise InvalidInputError("tail_tol must lie in (0, 1)")
    y_max = _y_max_for_tail(prior, tail_tol)
    if min_len is not None:
        y_max = max(y_max, int(min_len) - 1)
    values = pmf_on_range(prior, y_max)
    # The analytic bound certifies the tolerance; 1 - sum is the sharper
    # (essentially exact) value of the same tail, so store the smaller of the
    # two.  Both keep head + tail within 1e-10 of one.
    analytic = mixture_tail_bound(prior, y_max)
    tail_mass = min(max(0.0, 1.0 - float(values.sum())), analytic)
    return MixturePmf(
        values=values,
        tail_mass=tail_mass,
        source=source if source is not None else prior.describe(),
        tail_tol=tail_tol,
    )


# ---------------------------------------------------------------------------
# Bayes rule and Bayes risk
# ---------------------------------------------------------------------------

def bayes_rule(pmf: MixturePmf, y: int) -> float:
    """Posterior mean E[theta | Y = y] via the ratio form (y+1) f(y+1) / f(y).

    Requires y + 1 to be inside the table.  Raises
    :class:`DegenerateSupportError` when f(y) = 0 (in exact arithmetic the
    posterior is undefined there).
    """
    y = int(y)
    if not 0 <= y <= pmf.y_max - 1:
        raise InvalidInputError(
            f"need 0 <= y <= {pmf.y_max - 1} so that f(y+1) is tabulated"
        )
    fy = pmf.values[y]
    if fy == 0.0:
        raise DegenerateSupportError(f"f({y}) = 0: posterior mean undefined")
    return (y + 1) * float(pmf.values[y + 1]) / float(fy)


def posterior_moment_table(prior: DiscretePrior, y_hi: int, r: int = 1) -> np.ndarray:
    """E[theta^r | Y = y] for y = 0..y_hi, computed atom-wise in log domain.

    Unlike the pmf-ratio form this stays accurate arbitrarily far into the
    tail: posterior weights are a softmax over atoms, never a ratio of
    underflowed marginals.
    """
    log_w = np.log(prior.weights)
    powers = prior.atoms ** r
    out = np.empty(y_hi + 1)
    for start in range(0, y_hi + 1, _CHUNK):
        ys = np.arange(start, min(start + _CHUNK, y_hi + 1), dtype=float)
        block = log_poisson_pmf(ys[:, None], prior.atoms[None, :]) + log_w[None, :]
        block -= block.max(axis=1, keepdims=True)
        post = np.exp(block)
        post /= post.sum(axis=1, keepdims=True)
        out[start : start + ys.size] = post @ powers
    return out


def posterior_mean_table(prior: DiscretePrior, y_hi: int) -> np.ndarray:
    """theta_G(y) = E[theta | Y = y] for y = 0..y_hi."""
    return posterior_moment_table(prior, y_hi, r=1)


def mmse_exact(prior: DiscretePrior, tail_tol: float = 1e-12) -> tuple[float, float]:
    """Bayes risk E(theta_G(Y) - theta)^2 by deterministic summation.

    Returns ``(value, remainder_bound)`` where the remainder bounds the
    neglected tail contribution: each tail term is f(y) Var(theta | y), and
    the posterior variance never exceeds (atom range / 2)^2.
    """
    table = pmf_table(prior, tail_tol)
    m1 = posterior_moment_table(prior, table.y_max)
    m2 = posterior_moment_table(prior, table.y_max, r=2)
    var = np.maximum(m2 - m1 * m1, 0.0)
    value = float(table.values @ var)
    half_range = 0.5 * (prior.max_atom - float(prior.atoms[0]))
    remainder = table.tail_mass * half_range * half_range
    return value, remainder


def mmse(
    prior: DiscretePrior,
    mc_draws: int = 200_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Bayes risk of the posterior-mean rule, with a standard error.

    For priors with at most two atoms the finite sum is evaluated exactly and
    the standard error is 0.  Otherwise a Monte Carlo estimate over
    ``mc_draws`` fresh (theta, Y) pairs is returned.
    """
    if prior.n_atoms <= 2:
        value, remainder = mmse_exact(prior, tail_tol=1e-14)
        # remainder is astronomically small here; fold it into the value's
        # honesty rather than pretending to an SE
        return value + 0.5 * remainder, 0.0
    if mc_draws < 2:
        raise InvalidInputError("mc_draws must be >= 2")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    idx = rng.choice(prior.n_atoms, size=mc_draws, p=prior.weights)
    theta = prior.atoms[idx]
    y = rng.poisson(theta)
    means = posterior_mean_table(prior, int(y.max()))
    err = (means[y] - theta) ** 2
    est = float(err.mean())
    se = float(err.std(ddof=1) / math.sqrt(mc_draws))
    return est, se


# ---------------------------------------------------------------------------
# divergences
# ---------------------------------------------------------------------------

def hellinger_sq(f: MixturePmf, g: MixturePmf) -> float:
    """Unnormalized squared Hellinger distance sum_y (sqrt f - sqrt g)^2.

    Sums over the shared table range and adds a certified tail correction.
    The joint uncovered mass must be <= 1e-10, otherwise a
    :class:`TailCoverageError` asks for tables built with a smaller tail
    tolerance.
    """
    n = min(f.values.size, g.values.size)
    tail_f = float(f.values[n:].sum()) + f.tail_mass
    tail_g = float(g.values[n:].sum()) + g.tail_mass
    if tail_f + tail_g > 1e-10:
        raise TailCoverageError(
            "joint uncovered mass {:.3e} exceeds 1e-10; rebuild the pmf tables "
            "with a smaller tail_tol / longer range".format(tail_f + tail_g)
        )
    head = float(np.sum((np.sqrt(f.values[:n]) - np.sqrt(g.values[:n])) ** 2))
    # (sqrt tail_f - sqrt tail_g)^2 lower-bounds the tail contribution and is
    # itself bounded by the joint tail mass, so adding it keeps the result
    # within the certified window.
    correction = (math.sqrt(tail_f) - math.sqrt(tail_g)) ** 2
    return head + correction


def poisson_divergences(lam: float, lam2: float) -> tuple[float, float]:
    """Closed forms for a pair of Poisson pmfs.

    Returns ``(chi_sq, hellinger_sq_normalized)`` where

    * ``chi_sq = exp((lam - lam2)^2 / lam2) - 1`` is the chi-square divergence
      of Poi(lam) from Poi(lam2), and
    * ``hellinger_sq_normalized = 1 - exp(-(sqrt lam - sqrt lam2)^2 / 2)`` is
      the 1/2-normalized squared Hellinger distance (in [0, 1]); the
      unnormalized table convention of :func:`hellinger_sq` is twice this.
    """
    if not (lam >= 0 and lam2 > 0):
        raise InvalidInputError("need lam >= 0 and lam2 > 0")
    chi_sq = math.expm1((lam - lam2) ** 2 / lam2)
    hell = -math.expm1(-0.5 * (math.sqrt(lam) - math.sqrt(lam2)) ** 2)
    return chi_sq, hell


# ---------------------------------------------------------------------------
# generating function identity
# ---------------------------------------------------------------------------

def generating_function_check(prior: DiscretePrior, z: float) -> tuple[float, float]:
    """Both sides of E z^Y = E exp((z - 1) theta) for z in [0, 1].

    The left side sums the tabulated mixture pmf against z^y (the neglected
    tail contributes at most the table's tail mass since z <= 1); the right
    side evaluates the prior's moment generating function at z - 1.  The two
    should agree to ~1e-10.
    """
    if not (0.0 <= z <= 1.0):
        raise InvalidInputError("z must lie in [0, 1]")
    table = pmf_table(prior, tail_tol=1e-13)
    with np.errstate(under="ignore"):
        lhs = float(table.values @ np.power(z, np.arange(table.values.size, dtype=float)))
        rhs = float(prior.weights @ np.exp((z - 1.0) * prior.atoms))
    return lhs, rhs
