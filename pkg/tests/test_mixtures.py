import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poisson_eb.errors import InvalidInputError, TailCoverageError
from poisson_eb.mixtures import (
    DiscretePrior,
    MixturePmf,
    bayes_rule,
    generating_function_check,
    hellinger_sq,
    log_poisson_pmf,
    mixture_tail_bound,
    mmse,
    mmse_exact,
    pmf_table,
    poisson_divergences,
    poisson_tail_bound,
    posterior_mean_table,
)

G15 = DiscretePrior([1.0, 5.0], [0.5, 0.5])


# ---------------------------------------------------------------------------
# DiscretePrior container behavior
# ---------------------------------------------------------------------------

def test_prior_merges_duplicate_atoms():
    g = DiscretePrior([2.0, 2.0, 3.0], [0.25, 0.25, 0.5])
    assert g.n_atoms == 2
    np.testing.assert_allclose(g.atoms, [2.0, 3.0])
    np.testing.assert_allclose(g.weights, [0.5, 0.5])


def test_prior_rejects_bad_weights():
    with pytest.raises(InvalidInputError):
        DiscretePrior([1.0], [0.5])          # mass far from 1
    with pytest.raises(InvalidInputError):
        DiscretePrior([1.0, 2.0], [1.2, -0.2])
    with pytest.raises(InvalidInputError):
        DiscretePrior([-1.0], [1.0])         # negative atom


def test_prior_moments_and_mean():
    assert G15.mean == pytest.approx(3.0)
    assert G15.moment(2) == pytest.approx(13.0)
    assert G15.moment(0) == pytest.approx(1.0)
    g0 = DiscretePrior([0.0], [1.0])
    assert g0.moment(1) == 0.0


def test_prior_dict_round_trip():
    g2 = DiscretePrior.from_dict(G15.to_dict())
    np.testing.assert_allclose(g2.atoms, G15.atoms)
    np.testing.assert_allclose(g2.weights, G15.weights)


@given(
    atoms=st.lists(st.floats(0.0, 50.0), min_size=1, max_size=6),
    raw=st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6),
)
def test_prior_normalization_property(atoms, raw):
    w = np.array(raw[: len(atoms)])
    g = DiscretePrior(atoms, w / w.sum())
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(g.atoms) > 0)


# ---------------------------------------------------------------------------
# pmf machinery
# ---------------------------------------------------------------------------

def test_log_poisson_pmf_at_zero_rate():
    # theta = 0 concentrates on y = 0 exactly
    assert log_poisson_pmf(np.array([0.0]), np.array([0.0]))[0] == 0.0
    assert log_poisson_pmf(np.array([3.0]), np.array([0.0]))[0] == -math.inf


def test_pmf_table_sums_to_one():
    t = pmf_table(G15, tail_tol=1e-12)
    assert t.values.sum() + t.tail_mass == pytest.approx(1.0, abs=1e-10)
    assert t.tail_mass <= 1e-12 + 1e-15


def test_pmf_table_matches_direct_mixture():
    t = pmf_table(G15)
    # direct two-term mixture at a few y
    for y in (0, 1, 4, 11):
        direct = 0.5 * math.exp(-1.0) / math.factorial(y) + 0.5 * math.exp(
            y * math.log(5.0) - 5.0 - math.lgamma(y + 1)
        )
        assert t.f(y) == pytest.approx(direct, rel=1e-12)


def test_pmf_min_len_extends_table():
    t = pmf_table(G15, min_len=500)
    assert t.values.size >= 500


def test_mixture_pmf_validates_mass():
    with pytest.raises(InvalidInputError):
        MixturePmf(values=np.array([0.5, 0.2]), tail_mass=0.0)


# ---------------------------------------------------------------------------
# posterior quantities: hand-enumerated two-atom oracle values
# ---------------------------------------------------------------------------

def test_bayes_rule_against_enumeration():
    t = pmf_table(G15)
    # sum_w w Poi(y;t) t / f(y), enumerated separately
    assert bayes_rule(t, 0) == pytest.approx(1.0719448398483662, rel=1e-10)
    assert bayes_rule(t, 1) == pytest.approx(1.3355808861328318, rel=1e-10)
    assert bayes_rule(t, 3) == pytest.approx(3.783993041730812, rel=1e-10)
    assert bayes_rule(t, 7) == pytest.approx(4.997206526954597, rel=1e-10)


def test_posterior_mean_table_agrees_with_bayes_rule():
    t = pmf_table(G15)
    tab = posterior_mean_table(G15, 10)
    for y in range(10):
        assert tab[y] == pytest.approx(bayes_rule(t, y), rel=1e-9)


def test_mmse_exact_enumeration_oracle():
    val, rem = mmse_exact(G15, tail_tol=1e-13)
    assert val == pytest.approx(1.2450205804710435, rel=1e-9)
    assert rem <= 1e-11


def test_mmse_mc_matches_exact_within_se():
    val, rem = mmse_exact(G15)
    est, se = mmse(G15, mc_draws=200_000, seed=7)
    # exact route for tiny priors reports se = 0
    assert se == 0.0
    assert est == pytest.approx(val, rel=1e-9)


def test_mmse_bounded_by_prior_variance():
    var = G15.moment(2) - G15.mean ** 2
    val, _ = mmse_exact(G15)
    assert 0.0 < val < var


# ---------------------------------------------------------------------------
# divergences
# ---------------------------------------------------------------------------

def test_poisson_divergences_closed_forms():
    chi, hell = poisson_divergences(2.0, 1.0)
    assert chi == pytest.approx(math.e - 1.0, rel=1e-12)        # exp((2-1)^2/1) - 1
    chi14, hell14 = poisson_divergences(1.0, 4.0)
    assert hell14 == pytest.approx(0.3934693402873666, rel=1e-12)  # 1 - exp(-0.5)
    assert poisson_divergences(3.0, 3.0) == (0.0, 0.0)


def test_hellinger_sq_unnormalized_is_twice_normalized():
    # table route on point masses = plain Poisson pmfs
    f = pmf_table(DiscretePrior([1.0], [1.0]), tail_tol=1e-14)
    g = pmf_table(DiscretePrior([4.0], [1.0]), tail_tol=1e-14)
    h2 = hellinger_sq(f, g)
    assert h2 == pytest.approx(0.786938680574733, rel=1e-9)  # 2 (1 - e^{-1/2})
    _, hnorm = poisson_divergences(1.0, 4.0)
    assert h2 == pytest.approx(2.0 * hnorm, rel=1e-9)


def test_hellinger_sq_range():
    g = pmf_table(DiscretePrior([30.0], [1.0]), tail_tol=1e-13)
    f = pmf_table(DiscretePrior([0.5], [1.0]), tail_tol=1e-13, min_len=g.values.size)
    h2 = hellinger_sq(f, g)
    assert 0.0 <= h2 <= 2.0 + 1e-12


def test_hellinger_identical_tables_zero():
    f = pmf_table(G15, tail_tol=1e-12)
    assert hellinger_sq(f, f) == pytest.approx(0.0, abs=1e-14)


def test_hellinger_rejects_fat_joint_tails():
    fv = np.array([0.5, 0.3])
    f = MixturePmf(values=fv, tail_mass=0.2)
    g = MixturePmf(values=fv, tail_mass=0.2)
    with pytest.raises(TailCoverageError):
        hellinger_sq(f, g)


# ---------------------------------------------------------------------------
# tail bounds
# ---------------------------------------------------------------------------

def test_poisson_tail_bound_value():
    # exp(-t^2 / (2 (theta + t)))
    assert poisson_tail_bound(1.0, 10.0) == pytest.approx(0.010615346461976673, rel=1e-12)


def test_poisson_tail_bound_dominates_exact_tail():
    theta = 4.0
    pmf = np.exp(log_poisson_pmf(np.arange(200, dtype=float), np.array(theta)))
    for t in (2.0, 5.0, 10.0, 25.0):
        exact = float(pmf[int(theta + t) + 1 :].sum())
        assert exact <= poisson_tail_bound(theta, t) + 1e-15


def test_mixture_tail_bound_dominates():
    # exact tail past y=20 enumerated: 4.0546e-08; the per-atom Chernoff-style
    # bound is loose (1.86e-3) but must sit above
    b = mixture_tail_bound(G15, 20)
    assert b == pytest.approx(0.0018634629705914718, rel=1e-9)
    assert b >= 4.054625229944444e-08


# ---------------------------------------------------------------------------
# generating function identity
# ---------------------------------------------------------------------------

@settings(max_examples=50)
@given(
    z=st.floats(0.0, 1.0),
    a1=st.floats(0.0, 12.0),
    a2=st.floats(0.0, 12.0),
    w=st.floats(0.01, 0.99),
)
def test_generating_function_identity(z, a1, a2, w):
    g = DiscretePrior([a1, a2], [w, 1.0 - w]) if abs(a1 - a2) > 1e-9 else DiscretePrior([a1], [1.0])
    lhs, rhs = generating_function_check(g, z)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
