import math

import numpy as np
import pytest

from poisson_eb.errors import InvalidInputError, UnsupportedRegimeError
from poisson_eb.mixtures import mmse_exact, posterior_mean_table
from poisson_eb.priors import (
    PriorSpec,
    assouad_prior,
    divergent_mixture_pmf,
    divergent_mmse_diagnostic,
    heavy_tail_normalizer,
    parse_prior_spec,
    resolve,
)

HT2 = resolve(PriorSpec("heavy_tail", {"p": 2.0}))
TP = resolve(PriorSpec("two_point", {"eps": 0.2, "a": 5.0}))


# ---------------------------------------------------------------------------
# specs and parsing
# ---------------------------------------------------------------------------

def test_spec_validation_and_round_trip():
    with pytest.raises(InvalidInputError):
        PriorSpec("lognormal")
    spec = PriorSpec("two_point", {"eps": 0.2, "a": 5.0})
    again = PriorSpec.from_dict(spec.to_dict())
    assert again.family == "two_point" and again.params == spec.params
    assert "two_point" in spec.describe()


def test_parse_prior_spec():
    spec = parse_prior_spec("family=heavy_tail p=2")
    assert spec.family == "heavy_tail"
    assert spec.params == {"p": 2}
    spec = parse_prior_spec("family=discrete atoms=1,5 weights=0.5,0.5")
    assert spec.params["atoms"] == [1, 5]
    assert spec.params["weights"] == [0.5, 0.5]
    with pytest.raises(InvalidInputError):
        parse_prior_spec("p=2")                   # no family
    with pytest.raises(InvalidInputError):
        parse_prior_spec("family=heavy_tail p")   # not key=value


# ---------------------------------------------------------------------------
# simple atomic families
# ---------------------------------------------------------------------------

def test_point_mass_resolution():
    r = resolve(PriorSpec("point_mass", {"value": 2.5}), p=2.0)
    assert r.exact_discrete
    assert r.discretization.atoms.tolist() == [2.5]
    assert r.p_moment == pytest.approx(6.25)
    assert r.verify_discretization() == 0.0


def test_two_point_structure_and_oracle():
    d = TP.discretization
    np.testing.assert_allclose(d.atoms, [0.0, 5.0])
    np.testing.assert_allclose(d.weights, [0.8, 0.2])
    # posterior mean enumerated separately: only the zero atom competes at y=0
    tab = TP.oracle_table(3)
    assert tab[0] == pytest.approx(0.008408270129235638, rel=1e-10)
    assert tab[1] == pytest.approx(5.0, rel=1e-12)
    val, _ = TP.mmse_ref()
    assert val == pytest.approx(0.03363308051694264, rel=1e-9)


def test_moment_class_extremal_structure():
    r = resolve(PriorSpec("moment_class_extremal", {"u": 4.0, "m1": 2.0}))
    d = r.discretization
    np.testing.assert_allclose(d.atoms, [0.0, 8.0])
    np.testing.assert_allclose(d.weights, [0.75, 0.25])
    assert d.mean == pytest.approx(2.0)
    with pytest.raises(InvalidInputError):
        resolve(PriorSpec("moment_class_extremal", {"u": 1.0}))


def test_oracle_table_matches_posterior_mean_table():
    np.testing.assert_allclose(
        TP.oracle_table(12), posterior_mean_table(TP.discretization, 12), rtol=1e-12
    )
    val, rem = TP.mmse_ref()
    exact, _ = mmse_exact(TP.discretization, tail_tol=1e-13)
    assert val == pytest.approx(exact, rel=1e-12)


# ---------------------------------------------------------------------------
# heavy-tail family
# ---------------------------------------------------------------------------

def test_heavy_tail_normalizer_frozen():
    # quadrature of a^{-(p+1)} (log a)^{-2} over [e, inf), done independently
    assert heavy_tail_normalizer(2.0) == pytest.approx(26.642324945207406, rel=1e-10)
    assert heavy_tail_normalizer(1.5) == pytest.approx(13.67974337011199, rel=1e-10)
    with pytest.raises(InvalidInputError):
        heavy_tail_normalizer(0.0)


def test_heavy_tail_zero_mass_and_moment():
    # eps = 1 - 1/c0; the p-th moment is 1 by normalization
    assert HT2.discretization.atoms[0] == 0.0
    assert HT2.discretization.weights[0] == pytest.approx(0.9624657381795095, abs=1e-6)
    assert HT2.p_moment == pytest.approx(1.0, rel=1e-9)
    assert HT2.p == 2.0


def test_heavy_tail_discretization_certified():
    assert not HT2.exact_discrete
    assert HT2.disc_error <= HT2.disc_tol
    # re-checking against a refined quadrature stays within tolerance
    assert HT2.verify_discretization(factor=2) <= HT2.disc_tol


def test_heavy_tail_higher_moment_is_infinite():
    with pytest.raises(UnsupportedRegimeError):
        resolve(PriorSpec("heavy_tail", {"p": 2.0}), p=3.0)


def test_heavy_tail_sampler_mass_split():
    draws = HT2.sample(123, 20_000)
    frac_zero = float(np.mean(draws == 0.0))
    assert frac_zero == pytest.approx(0.96246, abs=0.01)
    body = draws[draws > 0]
    assert body.min() >= math.e - 1e-12


# ---------------------------------------------------------------------------
# sqrt-Cauchy family
# ---------------------------------------------------------------------------

def test_sqrt_cauchy_first_moment_closed_form():
    # E sqrt(|C|) = (2/pi) * pi / sqrt(2) = sqrt(2)
    r = resolve(PriorSpec("sqrt_cauchy"), p=1.0)
    assert r.p_moment == pytest.approx(math.sqrt(2.0), rel=1e-8)
    assert r.disc_error <= r.disc_tol


def test_sqrt_cauchy_second_moment_is_infinite():
    with pytest.raises(UnsupportedRegimeError):
        resolve(PriorSpec("sqrt_cauchy"), p=2.0)


# ---------------------------------------------------------------------------
# sampling determinism
# ---------------------------------------------------------------------------

def test_sampler_determinism_and_seed_sensitivity():
    a = TP.sample((5, 7), 1000)
    b = TP.sample((5, 7), 1000)
    c = TP.sample((5, 8), 1000)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert set(np.unique(a)) <= {0.0, 5.0}
    with pytest.raises(InvalidInputError):
        TP.sample(0, 0)


def test_sample_counts_pairs():
    theta, y = TP.sample_counts(99, 5000)
    assert theta.shape == y.shape == (5000,)
    assert np.issubdtype(y.dtype, np.integer)
    # zero means force zero counts
    assert np.all(y[theta == 0.0] == 0)
    theta2, y2 = TP.sample_counts(99, 5000)
    np.testing.assert_array_equal(y, y2)


def test_quantile_y_behavior():
    r = resolve(PriorSpec("point_mass", {"value": 1.0}))
    q_loose = r.quantile_y(1e-3)
    q_tight = r.quantile_y(1e-9)
    assert q_loose < q_tight
    # Poi(1): P(Y > 7) ~ 1e-6, P(Y > 13) ~ 1e-12
    assert 5 <= q_tight <= 20


# ---------------------------------------------------------------------------
# near-black interval prior
# ---------------------------------------------------------------------------

def test_assouad_collapses_at_small_budget():
    with pytest.raises(UnsupportedRegimeError):
        assouad_prior([0], 10_000, 2.0)          # c_p = 0.1 default


def test_assouad_structure():
    n, p, c_p = 10_000, 2.0, 30.0
    log2n = math.log(n) ** 2
    g0 = assouad_prior([0] * 15, n, p, c_p=c_p)
    g1 = assouad_prior([1] * 15, n, p, c_p=c_p)
    assert g0.atoms[0] == 0.0
    np.testing.assert_allclose(g0.weights, g1.weights)
    assert np.all(g1.atoms[1:] > g0.atoms[1:])
    # every atom sits inside its interval [i^2, (i+1)^2] (log n)^2, i = 6..20
    for g in (g0, g1):
        idx = np.arange(6, 21, dtype=float)
        assert np.all(g.atoms[1:] >= idx ** 2 * log2n)
        assert np.all(g.atoms[1:] <= (idx + 1.0) ** 2 * log2n)
    with pytest.raises(InvalidInputError):
        assouad_prior([0, 1], n, p, c_p=c_p)     # wrong bit count


def test_assouad_resolution_deterministic():
    spec = PriorSpec("assouad", {"n": 10_000, "p": 2.0, "c_p": 30.0})
    r1 = resolve(spec, seed=3)
    r2 = resolve(spec, seed=3)
    r3 = resolve(spec, seed=4)
    np.testing.assert_array_equal(r1.discretization.atoms, r2.discretization.atoms)
    assert not np.array_equal(r1.discretization.atoms, r3.discretization.atoms)


# ---------------------------------------------------------------------------
# divergent-Bayes-risk diagnostic
# ---------------------------------------------------------------------------

def test_divergent_pmf_frozen_values():
    # quadrature of integral_1^inf Poi(y; a) a^-2 da, independent of the
    # closed incomplete-gamma forms used in the implementation
    f = divergent_mixture_pmf(5)
    assert f[0] == pytest.approx(0.14849550677592194, rel=1e-10)
    assert f[1] == pytest.approx(0.2193839343955205, rel=1e-10)
    assert f[2] == pytest.approx(0.18393972058572122, rel=1e-10)
    assert f[3] == pytest.approx(0.12262648039048078, rel=1e-10)
    assert f[4] == pytest.approx(0.07664155024405049, rel=1e-10)
    assert f[5] == pytest.approx(0.049050592156192306, rel=1e-10)
    with pytest.raises(InvalidInputError):
        divergent_mixture_pmf(1)


def test_divergent_pmf_quadratic_decay():
    f = divergent_mixture_pmf(1000)
    assert 1000.0 ** 2 * f[1000] == pytest.approx(1.0, rel=0.01)


def test_divergent_partial_sums_grow_like_log():
    out = divergent_mmse_diagnostic(0.5, y_cap=4096)
    ys = [y for y, _ in out]
    vals = np.array([v for _, v in out])
    assert ys == [16 * 2 ** k for k in range(9)]
    assert np.all(np.diff(vals) > 0)
    # doubling increments approach log 2
    increments = np.diff(vals)
    assert increments[-1] == pytest.approx(math.log(2.0), abs=0.01)


def test_divergent_diagnostic_regime_guard():
    with pytest.raises(UnsupportedRegimeError):
        divergent_mmse_diagnostic(1.5)
    with pytest.raises(InvalidInputError):
        divergent_mmse_diagnostic(0.5, y_cap=8)
