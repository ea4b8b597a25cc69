"""Prior families: specifications, samplers, and certified discretizations.

A `PriorSpec` names a mixing-distribution family and its parameters; `resolve`
turns it into a `ResolvedPrior` carrying

* an exact sampler for the mean parameter theta (counter-based RNG, so runs
  are reproducible and order-independent),
* a finitely supported stand-in (`DiscretePrior`) whose Poisson mixture pmf
  provably matches the true one to within ``disc_tol`` in sup norm over the
  working range (continuous families are discretized by composite
  Gauss-Legendre quadrature in log theta, certified against a 4x refinement
  plus the dropped tail mass), and
* the p-th moment of the family (analytic where available).

Families
--------
``point_mass(value)`` | ``two_point(eps, a)`` | ``discrete(atoms, weights)``
| ``heavy_tail(p)``: eps at 0 plus density c0 a^{-(p+1)} (log a)^{-2} on
  [e, inf), normalized so the p-th moment is exactly 1
| ``sqrt_cauchy``: theta = sqrt(|C|) with C standard Cauchy (tail index 2)
| ``assouad(n, ...)``: the near-black two-point-per-interval construction
  used for lower-bound experiments
| ``moment_class_extremal(u, m1)``: (1 - 1/u) at 0 plus 1/u at u*m1, the
  sparse two-point prior extremal for the first-moment class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import exp1, expn, gammaincc

from .errors import (
    InvalidInputError,
    NumericalFailureError,
    UnsupportedRegimeError,
)
from .mixtures import (
    DiscretePrior,
    MixturePmf,
    mmse_exact,
    pmf_on_range,
    pmf_table,
    posterior_mean_table,
)

__all__ = [
    "FAMILIES",
    "PriorSpec",
    "parse_prior_spec",
    "ResolvedPrior",
    "resolve",
    "heavy_tail_density",
    "heavy_tail_normalizer",
    "assouad_prior",
    "divergent_mixture_pmf",
    "divergent_mmse_diagnostic",
]

FAMILIES = (
    "point_mass",
    "two_point",
    "discrete",
    "heavy_tail",
    "sqrt_cauchy",
    "assouad",
    "moment_class_extremal",
)

_QUAD_NODES = 12  # Gauss-Legendre nodes per panel


# ---------------------------------------------------------------------------
# specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    """A named prior family plus its parameter dict (JSON-able)."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InvalidInputError(
                f"unknown prior family {self.family!r}; choose from {FAMILIES}"
            )

    def describe(self) -> str:
        inner = " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})" if inner else self.family

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, obj: dict) -> "PriorSpec":
        return cls(obj["family"], dict(obj.get("params", {})))


def _parse_value(tok: str):
    for cast in (int, float):
        try:
            return cast(tok)
        except ValueError:
            pass
    if "," in tok:
        return [_parse_value(t) for t in tok.split(",") if t != ""]
    return tok


def parse_prior_spec(text: str) -> PriorSpec:
    """Parse ``family=heavy_tail p=2``-style key=value prior descriptions."""
    family = None
    params: dict = {}
    for tok in text.replace("\n", " ").split():
        if "=" not in tok:
            raise InvalidInputError(f"expected key=value, got {tok!r}")
        key, _, raw = tok.partition("=")
        if key == "family":
            family = raw
        else:
            params[key] = _parse_value(raw)
    if family is None:
        raise InvalidInputError("prior spec must set family=...")
    return PriorSpec(family, params)


# ---------------------------------------------------------------------------
# heavy-tail family internals
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def heavy_tail_normalizer(p: float) -> float:
    """c0(p) = 1 / integral_e^inf a^{-(p+1)} (log a)^{-2} da, always > 1.

    In u = log a the integral is integral_1^inf e^{-p u} u^{-2} du < 1.
    """
    if not (p > 0):
        raise InvalidInputError("tail exponent p must be positive")
    val, err = integrate.quad(lambda u: math.exp(-p * u) / (u * u), 1.0, np.inf,
                              epsabs=1e-13, epsrel=1e-13)
    if not (val > 0) or err > 1e-9:
        raise NumericalFailureError("heavy-tail normalizer quadrature failed")
    return 1.0 / val


def heavy_tail_density(p: float, a) -> np.ndarray | float:
    """Density c0(p) a^{-(p+1)} (log a)^{-2} of the continuous part, 0 below e.

    Integrates to 1 over [e, inf); the normalizer c0(p) exceeds 1 for every
    p > 0.
    """
    c0 = heavy_tail_normalizer(p)
    a_arr = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_a = np.log(np.maximum(a_arr, 1.0 + 1e-300))
        dens = np.where(
            a_arr >= math.e,
            c0 * a_arr ** -(p + 1.0) / (log_a * log_a),
            0.0,
        )
    return dens if dens.ndim else float(dens)


def _heavy_tail_zero_mass(p: float) -> float:
    # eps chosen so the p-th moment is exactly 1: the continuous part's p-th
    # moment telescopes to c0, so (1 - eps) c0 = 1.
    return 1.0 - 1.0 / heavy_tail_normalizer(p)


def _heavy_tail_moment(p_family: float, q: float) -> float:
    """q-th moment of the heavy_tail(p_family) prior; infinite for q > p_family."""
    if q > p_family:
        raise UnsupportedRegimeError(
            f"heavy_tail(p={p_family}) has infinite moments beyond order {p_family}"
        )
    if q == p_family:
        return 1.0
    c0 = heavy_tail_normalizer(p_family)
    val, _ = integrate.quad(
        lambda u: math.exp((q - p_family) * u) / (u * u), 1.0, np.inf,
        epsabs=1e-13, epsrel=1e-13,
    )
    return (1.0 - _heavy_tail_zero_mass(p_family)) * c0 * val


def _heavy_tail_theta_max(p: float, drop: float) -> float:
    # prior tail beyond T is bounded by c0 (1-eps) T^{-p} (log T)^{-2} / p
    c0_eff = 1.0  # c0 * (1 - eps) = 1 by construction
    t = math.e * 2
    while c0_eff * t ** -p / (math.log(t) ** 2 * p) > drop:
        t *= 1.5
    return t


# ---------------------------------------------------------------------------
# sqrt-Cauchy family internals
# ---------------------------------------------------------------------------

def _sqrt_cauchy_density(t) -> np.ndarray:
    # theta = |C|^{1/2}: density 4 t / (pi (1 + t^4)) on t >= 0
    t = np.asarray(t, dtype=float)
    return 4.0 * t / (math.pi * (1.0 + t ** 4))


def _sqrt_cauchy_moment(q: float) -> float:
    if q >= 2:
        raise UnsupportedRegimeError(
            f"sqrt_cauchy has tail index 2: moments of order >= 2 are infinite (got p={q})"
        )
    val, err = integrate.quad(lambda t: t ** q * 4.0 * t / (math.pi * (1.0 + t ** 4)),
                              0.0, np.inf, epsabs=1e-12, epsrel=1e-12)
    if err > 1e-8:
        raise NumericalFailureError("sqrt_cauchy moment quadrature failed")
    return val


# ---------------------------------------------------------------------------
# quadrature discretization with certificate
# ---------------------------------------------------------------------------

def _gl_discretize(density, u_lo: float, u_hi: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre in u = log theta; returns (atoms, raw weights)."""
    x, wq = np.polynomial.legendre.leggauss(_QUAD_NODES)
    edges = np.linspace(u_lo, u_hi, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halfs = 0.5 * np.diff(edges)
    u = (mids[:, None] + halfs[:, None] * x[None, :]).ravel()
    theta = np.exp(u)
    w = (halfs[:, None] * wq[None, :]).ravel() * density(theta) * theta
    return theta, w


def _certified_continuous_prior(
    density,
    u_lo: float,
    u_hi: float,
    zero_mass: float,
    body_mass: float,
    tail_drop: float,
    disc_tol: float,
    y_check: int,
    base_panels: int,
    source: str,
) -> tuple[DiscretePrior, float]:
    """Discretize `density` and certify sup-pmf accuracy against a 4x refinement.

    The returned error bound is sup_y |f_K - f_4K| + tail_drop (mass dropped
    beyond theta_max shifts the pmf by at most itself, uniformly in y).
    Panels double until the bound passes disc_tol, up to 3 times.
    """
    panels = base_panels
    for _ in range(4):
        atoms_c, w_c = _gl_discretize(density, u_lo, u_hi, panels)
        atoms_f, w_f = _gl_discretize(density, u_lo, u_hi, 4 * panels)

        def _mk(atoms, w):
            w = w * (body_mass / w.sum())
            if zero_mass > 0:
                return DiscretePrior(np.concatenate([[0.0], atoms]),
                                     np.concatenate([[zero_mass], w]))
            return DiscretePrior(atoms, w)

        coarse, fine = _mk(atoms_c, w_c), _mk(atoms_f, w_f)
        sup = float(np.max(np.abs(pmf_on_range(coarse, y_check) - pmf_on_range(fine, y_check))))
        bound = sup + tail_drop
        if bound <= disc_tol:
            return coarse, bound
        panels *= 2
    raise NumericalFailureError(
        f"could not certify {source} discretization to {disc_tol:g} "
        f"(last bound {bound:.3e} with {panels // 2} panels)"
    )


# ---------------------------------------------------------------------------
# resolved priors
# ---------------------------------------------------------------------------

class ResolvedPrior:
    """A prior ready for experiments: sampler + certified discrete stand-in.

    Heavier derived artifacts (pmf tables, oracle posterior-mean tables, the
    reference Bayes risk) are computed lazily and cached on the instance.
    """

    def __init__(
        self,
        spec: PriorSpec,
        p: float,
        discretization: DiscretePrior,
        p_moment: float,
        disc_tol: float,
        disc_error: float,
        sample_impl,
        exact_discrete: bool,
    ) -> None:
        self.spec = spec
        self.p = p
        self.discretization = discretization
        self.p_moment = p_moment
        self.disc_tol = disc_tol
        self.disc_error = disc_error
        self._sample_impl = sample_impl
        self.exact_discrete = exact_discrete
        self._cache: dict = {}

    # -- sampling -----------------------------------------------------------

    def sample(self, seed, size: int) -> np.ndarray:
        """Draw `size` mean parameters using a counter-based generator.

        `seed` may be an int or a tuple of ints; identical seeds reproduce
        identical draws regardless of call order.
        """
        if size < 1:
            raise InvalidInputError("size must be >= 1")
        entropy = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
        return self._sample_impl(rng, int(size))

    def sample_counts(self, seed, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw (theta, Y) pairs: theta from the prior, Y | theta Poisson."""
        theta = self.sample(seed, size)
        entropy = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy + [0x9E37])))
        return theta, rng.poisson(theta)

    # -- cached derived artifacts ------------------------------------------

    def pmf(self, tail_tol: float = 1e-11, min_len: int | None = None) -> MixturePmf:
        key = ("pmf", tail_tol, min_len)
        if key not in self._cache:
            self._cache[key] = pmf_table(
                self.discretization, tail_tol, min_len=min_len,
                source=f"resolved:{self.spec.describe()}",
            )
        return self._cache[key]

    def quantile_y(self, eps: float = 1e-9) -> int:
        """Smallest y with P(Y > y) <= eps under the discretized mixture."""
        key = ("q", eps)
        if key not in self._cache:
            table = self.pmf(tail_tol=min(eps * 1e-3, 1e-11))
            tail = 1.0 - np.cumsum(table.values)
            idx = np.nonzero(tail <= eps)[0]
            self._cache[key] = int(idx[0]) if idx.size else table.y_max
        return self._cache[key]

    def oracle_table(self, y_hi: int) -> np.ndarray:
        key = "oracle"
        have = self._cache.get(key)
        if have is None or have.size <= y_hi:
            self._cache[key] = posterior_mean_table(self.discretization, y_hi)
        return self._cache[key][: y_hi + 1]

    def mmse_ref(self) -> tuple[float, float]:
        """Reference Bayes risk (value, remainder bound) of the discretization."""
        if "mmse" not in self._cache:
            self._cache["mmse"] = mmse_exact(self.discretization, tail_tol=1e-13)
        return self._cache["mmse"]

    def verify_discretization(self, factor: int = 8, y_check: int | None = None) -> float:
        """Re-measure the pmf gap against a `factor`-times refined quadrature."""
        if self.exact_discrete:
            return 0.0
        rebuilt = _resolve_impl(self.spec, self.p, self.disc_tol, refine=factor)
        y = y_check if y_check is not None else min(self.quantile_y(1e-9), 20000)
        gap = np.abs(pmf_on_range(self.discretization, y) - pmf_on_range(rebuilt.discretization, y))
        return float(np.max(gap))


# ---------------------------------------------------------------------------
# family constructors
# ---------------------------------------------------------------------------

def _categorical_sampler(prior: DiscretePrior):
    def impl(rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(prior.n_atoms, size=size, p=prior.weights)
        return prior.atoms[idx]
    return impl


def _heavy_tail_sampler(p: float, eps: float):
    def impl(rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.zeros(size)
        cont = rng.random(size) >= eps
        need = int(cont.sum())
        draws = np.empty(0)
        while draws.size < need:
            m = max(64, 2 * (need - draws.size))
            a = math.e * (1.0 - rng.random(m)) ** (-1.0 / p)  # Pareto(p) on [e, inf)
            accept = rng.random(m) < 1.0 / np.log(a) ** 2
            draws = np.concatenate([draws, a[accept]])
        out[cont] = draws[:need]
        return out
    return impl


def _sqrt_cauchy_sampler():
    def impl(rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        return np.sqrt(np.abs(np.tan(math.pi * (u - 0.5))))
    return impl


def _resolve_impl(spec: PriorSpec, p: float | None, disc_tol: float, seed: int = 0,
                  refine: int = 1) -> ResolvedPrior:
    family, params = spec.family, dict(spec.params)

    if family == "point_mass":
        lam = float(params.get("value", params.get("lam", 1.0)))
        if lam < 0:
            raise InvalidInputError("point mass location must be >= 0")
        prior = DiscretePrior([lam], [1.0])
        p_eff = 1.0 if p is None else p
        return ResolvedPrior(spec, p_eff, prior, lam ** p_eff, disc_tol, 0.0,
                             _categorical_sampler(prior), True)

    if family == "two_point":
        eps = float(params["eps"])
        a = float(params["a"])
        if not (0 < eps < 1) or not (a > 0):
            raise InvalidInputError("two_point needs eps in (0,1) and a > 0")
        prior = DiscretePrior([0.0, a], [1.0 - eps, eps])
        p_eff = 1.0 if p is None else p
        return ResolvedPrior(spec, p_eff, prior, eps * a ** p_eff, disc_tol, 0.0,
                             _categorical_sampler(prior), True)

    if family == "moment_class_extremal":
        u = float(params["u"])
        m1 = float(params.get("m1", 1.0))
        if not (u > 1) or not (m1 > 0):
            raise InvalidInputError("moment_class_extremal needs u > 1 and m1 > 0")
        prior = DiscretePrior([0.0, u * m1], [1.0 - 1.0 / u, 1.0 / u])
        p_eff = 1.0 if p is None else p
        return ResolvedPrior(spec, p_eff, prior, prior.moment(p_eff), disc_tol, 0.0,
                             _categorical_sampler(prior), True)

    if family == "discrete":
        atoms = np.asarray(params["atoms"], dtype=float)
        weights = np.asarray(params["weights"], dtype=float)
        prior = DiscretePrior(atoms, weights)
        p_eff = 1.0 if p is None else p
        return ResolvedPrior(spec, p_eff, prior, prior.moment(p_eff), disc_tol, 0.0,
                             _categorical_sampler(prior), True)

    if family == "assouad":
        n = int(params["n"])
        p_eff = float(params.get("p", p if p is not None else 2.0))
        m_p = float(params.get("m_p", 1.0))
        c_p = float(params.get("c_p", 0.1))
        tau = params.get("tau")
        if tau is None:
            n_bits = _assouad_shape(n, p_eff, m_p, c_p)[1]
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xA55])))
            tau = rng.integers(0, 2, size=n_bits).tolist()
        elif isinstance(tau, (int, float)):
            tau = [int(tau)]
        prior = assouad_prior(tau, n, p_eff, m_p, c_p)
        return ResolvedPrior(spec, p_eff, prior, prior.moment(p_eff), disc_tol, 0.0,
                             _categorical_sampler(prior), True)

    if family == "heavy_tail":
        p_fam = float(params["p"])
        if not (p_fam > 0):
            raise InvalidInputError("heavy_tail needs p > 0")
        p_eff = p_fam if p is None else p
        p_moment = _heavy_tail_moment(p_fam, p_eff)  # raises when infinite
        eps = _heavy_tail_zero_mass(p_fam)
        drop = min(disc_tol * 1e-2, 1e-9)
        theta_max = _heavy_tail_theta_max(p_fam, drop)
        y_check = int(1.2 * theta_max) + 50
        base = max(24, int(6 * (math.log(theta_max) - 1.0)))
        prior, err = _certified_continuous_prior(
            lambda a: heavy_tail_density(p_fam, a),
            1.0, math.log(theta_max),
            zero_mass=eps, body_mass=1.0 - eps, tail_drop=drop,
            disc_tol=disc_tol, y_check=y_check,
            base_panels=base * refine, source=f"heavy_tail(p={p_fam})",
        )
        return ResolvedPrior(spec, p_eff, prior, p_moment, disc_tol, err,
                             _heavy_tail_sampler(p_fam, eps), False)

    if family == "sqrt_cauchy":
        p_eff = 1.0 if p is None else p
        p_moment = _sqrt_cauchy_moment(p_eff)  # raises for p >= 2
        drop = min(disc_tol * 1e-2, 1e-9)
        # mass below t_lo is ~ 2 t_lo^2 / pi; beyond t_hi it is <= (2/pi) t_hi^-2
        t_lo = math.sqrt(0.25 * math.pi * drop)
        t_hi = math.sqrt(2.0 / (math.pi * 0.5 * drop))
        y_check = min(int(1.2 * t_hi) + 50, 20000)
        base = max(24, int(4 * (math.log(t_hi) - math.log(t_lo))))
        prior, err = _certified_continuous_prior(
            _sqrt_cauchy_density,
            math.log(t_lo), math.log(t_hi),
            zero_mass=0.0, body_mass=1.0, tail_drop=drop,
            disc_tol=disc_tol, y_check=y_check,
            base_panels=base * refine, source="sqrt_cauchy",
        )
        return ResolvedPrior(spec, p_eff, prior, p_moment, disc_tol, err,
                             _sqrt_cauchy_sampler(), False)

    raise InvalidInputError(f"unknown family {family!r}")  # pragma: no cover


def resolve(spec: PriorSpec, p: float | None = None, disc_tol: float = 1e-6,
            seed: int = 0) -> ResolvedPrior:
    """Resolve a prior spec into sampler + certified discretization.

    Raises :class:`UnsupportedRegimeError` when the requested moment order is
    infinite for the family, and :class:`NumericalFailureError` when the
    discretization cannot be certified to `disc_tol`.
    """
    if not (0 < disc_tol <= 1e-2):
        raise InvalidInputError("disc_tol must lie in (0, 1e-2]")
    return _resolve_impl(spec, p, disc_tol, seed=seed)


# ---------------------------------------------------------------------------
# Assouad construction
# ---------------------------------------------------------------------------

def _assouad_shape(n: int, p: float, m_p: float, c_p: float) -> tuple[float, int, int]:
    if n < 3:
        raise InvalidInputError("assouad needs n >= 3")
    x = c_p * n ** (1.0 / (2.0 * p + 1.0)) * m_p ** (1.0 / (2.0 * p + 1.0)) / math.log(n)
    N = math.ceil(x) - 1
    i0 = max(1, math.floor(x / 3.0))
    if N < i0:
        raise UnsupportedRegimeError(
            f"assouad construction collapses at n={n}, p={p}, c_p={c_p}: "
            f"N={N} < i0={i0}; increase n or c_p"
        )
    return x, N - i0 + 1, i0


def assouad_prior(tau, n: int, p: float, m_p: float = 1.0, c_p: float = 0.1) -> DiscretePrior:
    """Two-point-per-interval perturbation prior indexed by a bit vector tau.

    Intervals I_i = [i^2 (log n)^2, (i+1)^2 (log n)^2] for i = i0..N carry
    weight w_i = m_p ((i+1)^2 (log n)^2)^{-(p + 1/2)}; within I_i the atom
    sits at the center a_i when tau_i = 0 and at a_i + delta_i when tau_i = 1,
    with delta_i^2 = a_i / (n w_i (log n)^10).  The remaining mass sits at 0.
    Raises :class:`UnsupportedRegimeError` when the weights exceed the budget
    (w_0 < 0) or the perturbed atom escapes its interval.
    """
    x, n_bits, i0 = _assouad_shape(n, p, m_p, c_p)
    N = i0 + n_bits - 1
    tau = np.asarray(tau, dtype=int)
    if tau.shape != (n_bits,) or np.any((tau != 0) & (tau != 1)):
        raise InvalidInputError(f"tau must be {n_bits} bits for n={n} (indices {i0}..{N})")
    log2n = math.log(n) ** 2
    idx = np.arange(i0, N + 1, dtype=float)
    lo_edge = idx ** 2 * log2n
    hi_edge = (idx + 1.0) ** 2 * log2n
    a = 0.5 * (lo_edge + hi_edge)
    w = m_p * hi_edge ** -(p + 0.5)
    w0 = 1.0 - w.sum()
    if w0 < -1e-12:
        raise UnsupportedRegimeError(f"interval weights exceed unit mass (w0 = {w0:.3e})")
    w0 = max(w0, 0.0)
    delta = np.sqrt(a / (n * w * math.log(n) ** 10))
    if np.any(a + delta > hi_edge):
        raise UnsupportedRegimeError("perturbed atom escapes its interval; increase n")
    atoms = np.concatenate([[0.0], np.where(tau == 1, a + delta, a)])
    weights = np.concatenate([[w0], w])
    return DiscretePrior(atoms, weights)


# ---------------------------------------------------------------------------
# divergent-Bayes-risk diagnostic
# ---------------------------------------------------------------------------

def divergent_mixture_pmf(y_hi: int) -> np.ndarray:
    """Exact mixture pmf of the density a^{-2} on [1, inf): f(y) for y <= y_hi.

    f(0) = E_2(1), f(1) = E_1(1), and for y >= 2
    f(y) = Q(y-1, 1) / (y (y-1)) with Q the regularized upper incomplete
    gamma — equivalently the P(Poi(1) <= y-2) tail constant.  Decays like
    y^{-2}, so the mean E[Y] is already infinite.
    """
    if y_hi < 2:
        raise InvalidInputError("y_hi must be >= 2")
    f = np.empty(y_hi + 1)
    f[0] = expn(2, 1.0)
    f[1] = exp1(1.0)
    ys = np.arange(2, y_hi + 1, dtype=float)
    f[2:] = gammaincc(ys - 1.0, 1.0) / (ys * (ys - 1.0))
    return f


def _divergent_summands(y_hi: int) -> np.ndarray:
    """Summands s(y) = (y+1)/f(y) [(y+2) f(y+2) f(y) - (y+1) f(y+1)^2].

    Each equals f(y) Var(theta | Y = y), hence is nonnegative; s(y) ~ 1/y, so
    the partial sums grow like log Y.  For y >= 2 the expression is reduced
    to [y (q_{y+2} q_y - q_{y+1}^2) + q_{y+1}^2] / (y q_y) with
    q_j = Q(j - 1, 1), which sidesteps the catastrophic cancellation of the
    raw form at large y.
    """
    f = divergent_mixture_pmf(max(y_hi + 2, 4))
    s = np.empty(y_hi + 1)
    for y in (0, 1):
        s[y] = (y + 1.0) / f[y] * ((y + 2.0) * f[y + 2] * f[y] - (y + 1.0) * f[y + 1] ** 2)
    ys = np.arange(2, y_hi + 1, dtype=float)
    # q_j = Q(j - 1, 1) for j = y, y+1, y+2
    qy = gammaincc(ys - 1.0, 1.0)
    qy1 = gammaincc(ys, 1.0)
    qy2 = gammaincc(ys + 1.0, 1.0)
    d2 = qy2 * qy - qy1 * qy1
    s[2:] = (ys * d2 + qy1 * qy1) / (ys * qy)
    return s


def divergent_mmse_diagnostic(p: float, y_cap: int = 4096) -> list[tuple[int, float]]:
    """Partial Bayes-risk sums S(Y) for Y = 16, 32, ..., <= y_cap.

    The mixing density a^{-2} on [1, inf) has finite p-th moment for p < 1
    yet infinite Bayes risk: S(Y) = sum_{y<=Y} f(y) Var(theta | y) grows like
    log Y without bound (increments of ~log 2 per doubling).  `p` is
    validated to be in the finite-moment regime (0, 1); the sums themselves
    do not depend on it.
    """
    if not (0 < p < 1):
        raise UnsupportedRegimeError(
            f"this diagnostic concerns the finite-moment regime p in (0,1); got p={p}"
        )
    if y_cap < 16:
        raise InvalidInputError("y_cap must be >= 16")
    s = _divergent_summands(y_cap)
    cum = np.cumsum(s)
    out = []
    y = 16
    while y <= y_cap:
        out.append((y, float(cum[y])))
        y *= 2
    return out
