import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from casht.costs import Erlang, Exponential, Hyperexponential, LogLogistic, Pareto
from casht.deadlines import (
    PlanError, benefit_verdict, loglogistic_median_deadline, numeric_optimal_deadline, pareto_foc,
    pareto_optimal_deadline, pareto_tau_star, plan_deadlines,
)


def test_pareto_optimum_frozen():
    opt = pareto_optimal_deadline(1.0, 1.5)
    assert opt.T_star == pytest.approx(3.41825, abs=1e-3)
    assert abs(pareto_foc(opt.tau_star, 1.5)) <= 1e-6
    assert opt.kappa_star == pytest.approx(2.27883, abs=1e-5)
    assert not opt.mean_infinite


def test_pareto_optimum_is_fast():
    pareto_optimal_deadline(1.0, 1.5)
    t0 = time.perf_counter()
    for _ in range(100):
        pareto_optimal_deadline(1.0, 1.5)
    assert (time.perf_counter() - t0) / 100 < 1e-3


def test_pareto_alpha_two_closed_form():
    assert pareto_tau_star(2.0) == pytest.approx(2.0 + math.sqrt(3.0), abs=1e-10)


def test_pareto_alpha_one_limit():
    # tau - 2 - ln tau = 0 at alpha = 1, continuous with alpha -> 1
    t1 = pareto_tau_star(1.0)
    assert t1 - 2.0 - math.log(t1) == pytest.approx(0.0, abs=1e-10)
    assert pareto_tau_star(1.0 + 1e-6) == pytest.approx(t1, rel=1e-4)
    assert pareto_optimal_deadline(1.0, 0.8).mean_infinite


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(1.05, 4.0))
def test_pareto_root_is_grid_minimum(x_min, alpha):
    m = Pareto(x_min, alpha)
    opt = pareto_optimal_deadline(x_min, alpha)
    grid = x_min * np.geomspace(1.0 + 1e-4, 200.0, 400)
    assert opt.kappa_star <= min(m.kappa(float(t)) for t in grid) + 1e-9
    assert opt.kappa_star < m.mean
    assert opt.T_star > alpha * x_min


def test_verdicts():
    assert benefit_verdict(Pareto(1, 1.5), 3.0).verdict == "improves"
    assert benefit_verdict(Pareto(1, 1.5), 1.2).verdict == "degrades"
    assert benefit_verdict(Pareto(1, 1.5), 1.5).verdict == "neutral"
    assert benefit_verdict(Exponential(1.0), 0.7).verdict == "neutral"
    assert benefit_verdict(Erlang(2, 1.0), 1.0).verdict == "degrades"
    assert benefit_verdict(Hyperexponential(0.5, 1, 10), 1.0).verdict == "improves"
    assert benefit_verdict(Pareto(1, 0.9), 2.0).verdict == "improves"
    assert benefit_verdict(Pareto(1, 1.5), math.inf).verdict == "neutral"


def test_loglogistic_median_deadline():
    assert loglogistic_median_deadline(4.0, 1.5) == 4.0


def test_numeric_finds_loglogistic_interior_minimum():
    m = LogLogistic(4.0, 1.5)
    t, k = numeric_optimal_deadline(m, 0.04, 400.0)
    ref = minimize_scalar(m.kappa, bounds=(1.0, 20.0), method="bounded", options={"xatol": 1e-10})
    assert t == pytest.approx(ref.x, rel=1e-5)
    assert k == pytest.approx(ref.fun, rel=1e-12)
    assert k == pytest.approx(5.906, abs=1e-3)
    assert k < m.kappa(4.0) < m.mean


def test_numeric_returns_none_when_nothing_helps():
    assert numeric_optimal_deadline(Erlang(3, 1.0), 0.01, 100.0) is None
    assert numeric_optimal_deadline(Exponential(1.0), 0.01, 100.0) is None


def test_numeric_matches_pareto_root():
    t, k = numeric_optimal_deadline(Pareto(1.0, 1.5), 1.0001, 1000.0, tol=1e-12)
    assert t == pytest.approx(pareto_optimal_deadline(1.0, 1.5).T_star, rel=1e-6)


def test_plan_modes():
    models = [Pareto(1.0, 1.5), LogLogistic(4.0, 1.5), Erlang(2, 1.0), Hyperexponential(0.5, 1.0, 10.0)]
    none = plan_deadlines(models, "none")
    assert all(math.isinf(t) for t in none.deadlines)
    assert none.effective_costs == tuple(m.mean for m in models)
    opt = plan_deadlines(models, "optimal")
    assert opt.deadlines[0] == pytest.approx(3.41825, abs=1e-3)
    assert opt.deadlines[1] == 4.0
    assert math.isinf(opt.deadlines[2])
    assert opt.effective_costs[3] < models[3].mean
    med = plan_deadlines(models, "median")
    assert med.deadlines == tuple(m.median for m in models)
    fixed = plan_deadlines(models, "fixed", 5.0)
    assert fixed.deadlines == (5.0,) * 4
    for m, t, k in zip(models, opt.deadlines, opt.effective_costs):
        assert k <= m.mean + 1e-12


def test_plan_loglogistic_degrading_median_falls_back():
    plan = plan_deadlines([LogLogistic(4.0, 2.5)], "optimal")
    assert math.isinf(plan.deadlines[0])


def test_plan_errors_name_action():
    with pytest.raises(PlanError) as e:
        plan_deadlines([Exponential(1.0), Pareto(2.0, 1.5)], "fixed", [1.0, 1.5])
    assert e.value.action == 1
    with pytest.raises(ValueError):
        plan_deadlines([Exponential(1.0)], "sometimes")
    with pytest.raises(ValueError):
        plan_deadlines([Exponential(1.0)], "fixed")


def test_cdf_at_deadlines():
    models = [Pareto(1.0, 1.5), Exponential(1.0)]
    plan = plan_deadlines(models, "fixed", [2.0, math.inf])
    assert plan.cdf_at_deadlines(models) == (pytest.approx(1 - 2 ** -1.5), 1.0)
