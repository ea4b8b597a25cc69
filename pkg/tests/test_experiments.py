import math

import numpy as np
import pytest

from poisson_eb.errors import InvalidInputError
from poisson_eb import experiments as ex
from poisson_eb.experiments import (
    ExperimentPlan,
    ExperimentRow,
    density_risk_trial,
    fit_rate,
    individual_regret_trial,
    parse_plan,
    robbins_instability_probe,
    run_plan,
    total_regret_trial,
)
from poisson_eb.priors import PriorSpec, resolve

TP_SPEC = PriorSpec("two_point", {"eps": 0.2, "a": 5.0})
TP = resolve(TP_SPEC)

PLAN_TEXT = """\
# rate comparison at desk scale
name = demo
prior = family=two_point eps=0.2 a=5
p = 2
n_grid = 20,40
replicates = 2
methods = robbins,robbins-addone
metrics = individual_regret,total_regret
seed = 11
"""


def small_plan(**kw):
    base = dict(
        prior=TP_SPEC,
        p=2.0,
        n_grid=(20, 40),
        replicates=2,
        methods=("robbins", "robbins-addone"),
        metrics=("individual_regret", "total_regret"),
        seed=11,
    )
    base.update(kw)
    return ExperimentPlan(**base)


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------

def test_plan_validation():
    with pytest.raises(InvalidInputError):
        small_plan(n_grid=(40, 20))                     # not ascending
    with pytest.raises(InvalidInputError):
        small_plan(n_grid=(20, 20))                     # not distinct
    with pytest.raises(InvalidInputError):
        small_plan(n_grid=(5, 20))                      # too small
    with pytest.raises(InvalidInputError):
        small_plan(replicates=0)
    with pytest.raises(InvalidInputError):
        small_plan(metrics=("mse",))
    with pytest.raises(InvalidInputError):
        small_plan(methods=("james-stein",))
    with pytest.raises(InvalidInputError):
        small_plan(methods=(), metrics=("individual_regret",))
    assert small_plan(methods=(), metrics=("hellinger_sq",)).methods == ()


def test_parse_plan_round_trip():
    plan = parse_plan(PLAN_TEXT)
    assert plan.name == "demo"
    assert plan.prior.family == "two_point"
    assert plan.p == 2.0
    assert plan.n_grid == (20, 40)
    assert plan.replicates == 2
    assert plan.methods == ("robbins", "robbins-addone")
    assert plan.metrics == ("individual_regret", "total_regret")
    assert plan.seed == 11
    assert plan.direct_total is False
    assert plan.overrides == {}


def test_parse_plan_overrides_and_defaults():
    plan = parse_plan(
        "prior = family=heavy_tail p=1.5\n"
        "n_grid = 100,1000\n"
        "replicates = 1\n"
        "methods = npmle\n"
        "npmle_y0 = 25\n"
        "npmle_rho = 1e-8\n"
        "direct_total = 1\n"
    )
    assert plan.overrides == {"npmle_y0": 25, "npmle_rho": 1e-8}
    assert plan.direct_total is True
    assert plan.p == 1.5          # inherited from the prior parameters
    assert plan.metrics == ("individual_regret",)


def test_parse_plan_errors():
    with pytest.raises(InvalidInputError):
        parse_plan("prior = family=two_point eps=0.2 a=5\n")     # missing keys
    with pytest.raises(InvalidInputError):
        parse_plan("voltage = 9\n" + PLAN_TEXT)                  # unknown key
    with pytest.raises(InvalidInputError):
        parse_plan("just a line\n")


# ---------------------------------------------------------------------------
# rate fits
# ---------------------------------------------------------------------------

def test_fit_rate_recovers_exact_power_law():
    ns = np.array([100.0, 1000.0, 10_000.0, 100_000.0])
    fit = fit_rate(ns, 3.0 * ns ** -1.0, method="m", metric="k")
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.ci_lo <= -1.0 <= fit.ci_hi
    assert fit.ci_hi - fit.ci_lo < 1e-9
    assert fit.n_points == 4


def test_fit_rate_excludes_nonpositive_with_warning():
    ns = np.array([100.0, 1000.0, 10_000.0, 100_000.0, 100_000.0])
    vals = np.array([3e-2, 3e-3, 3e-4, 3e-5, -1.0])
    with pytest.warns(RuntimeWarning, match="nonpositive"):
        fit = fit_rate(ns, vals)
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)


def test_fit_rate_demands_span_and_points():
    with pytest.raises(InvalidInputError):
        fit_rate([100, 1000, 10_000], [1.0, 0.1, 0.01])          # 3 points
    # 100 -> 3162 is 1.49997 decades: just under the bar
    with pytest.raises(InvalidInputError):
        fit_rate([100, 300, 1000, 3162], [1, 2, 3, 4.0])
    with pytest.raises(InvalidInputError):
        fit_rate([100, 1000], [1.0, 2.0, 3.0])                   # shape clash


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

def test_oracle_method_has_zero_regret():
    value, tail, flags = individual_regret_trial(TP, 50, "oracle", (1, 2))
    assert value == 0.0
    assert tail == 0.0
    assert flags == []


def test_individual_regret_trial_is_deterministic():
    a = individual_regret_trial(TP, 50, "robbins", (3, 4))
    b = individual_regret_trial(TP, 50, "robbins", (3, 4))
    c = individual_regret_trial(TP, 50, "robbins", (3, 5))
    assert a == b
    assert a != c
    assert a[0] >= 0.0 and math.isfinite(a[0])


def test_npmle_method_runs_for_label_moment_p1():
    # p = 1 has no tuning schedule; the mixture rule must fall back rather
    # than refuse fixed-prior plans
    r = resolve(TP_SPEC, p=1.0)
    value, tail, flags = individual_regret_trial(r, 30, "npmle", (9, 9))
    assert math.isfinite(value) and value >= 0.0


def test_total_regret_product_and_direct_paths():
    out = total_regret_trial(TP, 40, "robbins-addone", (7, 1), direct=True)
    assert out["value"] == pytest.approx(
        40 * individual_regret_trial(TP, 40, "robbins-addone", (7, 1))[0]
    )
    assert "direct_value" in out
    assert math.isfinite(out["direct_value"])
    # direct path re-run reproduces itself
    again = total_regret_trial(TP, 40, "robbins-addone", (7, 1), direct=True)
    assert out["direct_value"] == again["direct_value"]


def test_density_risk_trial_bounds():
    value, flags = density_risk_trial(TP, 60, (2, 8))
    assert 0.0 <= value <= 2.0
    assert isinstance(flags, list)
    with pytest.raises(InvalidInputError):
        density_risk_trial(TP, 5, (2, 8))


# ---------------------------------------------------------------------------
# instability probe
# ---------------------------------------------------------------------------

def test_probe_deterministic_census():
    sc = resolve(PriorSpec("sqrt_cauchy"), p=1.0)
    a = robbins_instability_probe(sc, 100, 5)
    b = robbins_instability_probe(sc, 100, 5)
    assert a == b
    # a heavy-tailed sample of 100 counts leaves empty cells below its max
    assert a.gap_sites >= 1
    assert a.y_max > 0


def test_probe_degenerate_sample_is_clean():
    pm0 = resolve(PriorSpec("point_mass", {"value": 0.0}))
    pr = robbins_instability_probe(pm0, 50, 1)
    assert pr == ex.ProbeResult(n=50, y_max=0, gap_sites=0, huge_sites=0)
    with pytest.raises(InvalidInputError):
        robbins_instability_probe(pm0, 0, 1)


# ---------------------------------------------------------------------------
# the sweep driver
# ---------------------------------------------------------------------------

def test_run_plan_layout_and_determinism():
    plan = small_plan()
    rep1 = run_plan(plan, resolved=TP)
    rep2 = run_plan(plan, resolved=TP)
    assert rep1.rows == rep2.rows
    assert rep1.rows_csv() == rep2.rows_csv()
    assert rep1.slopes_csv() == rep2.slopes_csv()
    # every scheduled row exists, in (n, replicate, method, metric) fold order
    assert len(rep1.rows) == 2 * 2 * 2 * 2
    keys = [(r.n, r.replicate, r.method, r.metric) for r in rep1.rows]
    assert keys == sorted(
        keys,
        key=lambda k: (k[0], k[1], plan.methods.index(k[2]), k[3] != "individual_regret"),
    )
    # runtime is measured but never serialized
    assert rep1.runtime_seconds > 0.0
    assert "runtime" not in rep1.rows_csv()


def test_run_plan_total_is_n_times_individual():
    rep = run_plan(small_plan(), resolved=TP)
    for r in rep.rows:
        if r.metric == "total_regret":
            (ind,) = [
                q.value for q in rep.rows
                if (q.n, q.replicate, q.method) == (r.n, r.replicate, r.method)
                and q.metric == "individual_regret"
            ]
            assert r.value == r.n * ind


def test_run_plan_header_and_accessors():
    rep = run_plan(small_plan(), resolved=TP)
    head = "\n".join(rep.header_lines())
    assert "two_point" in head and "seed=11" in head and "poisson_eb" in head
    means = rep.mean_by_n("robbins", "individual_regret")
    assert sorted(means) == [20, 40]
    assert means[20] == pytest.approx(
        float(np.mean(rep.values(20, "robbins", "individual_regret")))
    )
    assert len(rep.values(40, "robbins-addone", "total_regret")) == 2


def test_run_plan_direct_total_rows():
    plan = small_plan(methods=("robbins-addone",), direct_total=True, n_grid=(20,),
                      replicates=1, metrics=("total_regret",))
    rep = run_plan(plan, resolved=TP)
    metrics = [r.metric for r in rep.rows]
    assert metrics == ["total_regret", "total_regret_direct"]
    assert all(math.isfinite(r.value) for r in rep.rows)


def test_run_plan_hellinger_rows():
    plan = small_plan(methods=(), metrics=("hellinger_sq",), n_grid=(30,), replicates=2)
    rep = run_plan(plan, resolved=TP)
    assert [r.method for r in rep.rows] == ["npmle", "npmle"]
    assert all(0.0 <= r.value <= 2.0 for r in rep.rows)


def test_run_plan_failed_trials_leave_flagged_rows(monkeypatch):
    def boom(*a, **k):
        raise ValueError("synthetic failure")

    monkeypatch.setattr(ex, "individual_regret_trial", boom)
    rep = run_plan(small_plan(), resolved=TP)
    assert len(rep.rows) == 2 * 2 * 2 * 2
    for r in rep.rows:
        assert math.isnan(r.value)
        assert r.flags == "failed:ValueError"


def test_run_plan_skips_slopes_for_short_grids():
    rep = run_plan(small_plan(), resolved=TP)       # 2 n-values: ineligible
    assert rep.slopes == []


def test_run_plan_emits_slopes_for_wide_grids():
    plan = small_plan(
        methods=("robbins-addone",), metrics=("individual_regret",),
        n_grid=(20, 60, 200, 700), replicates=2,
    )
    rep = run_plan(plan, resolved=TP)
    assert len(rep.slopes) == 1
    s = rep.slopes[0]
    assert s.method == "robbins-addone" and s.metric == "individual_regret"
    assert s.n_points == 4
    assert "slope" in rep.slopes_csv().splitlines()[2]
