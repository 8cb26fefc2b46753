import dataclasses
import math

import numpy as np
import pytest

from casht import _pykernel
from casht.costs import LogLogistic, Pareto
from casht.deadlines import plan_deadlines
from casht.engine import (
    Arm, InvalidPlanError, available_backends, prepare_arm, run_batch, run_trial, run_trials, summarize,
    wald_consistency,
)
from casht.numerics import rng_stream
from casht.policies import POLICY_KINDS, PolicyConfig

needs_ext = pytest.mark.skipif("cython" not in available_backends(), reason="compiled kernel not built")


def arm(obs, costs, plan, kind="chernoff", delta=1e-2, timing="ex_ante", **kw):
    return Arm(PolicyConfig(kind, delta), obs, costs, plan, timing, **kw)


@needs_ext
@pytest.mark.parametrize("kind", POLICY_KINDS)
@pytest.mark.parametrize("timing", ["ex_ante", "ex_post"])
def test_backends_bit_identical(kind, timing, desk_instance, desk_pareto_costs, desk_pareto_plan):
    a = arm(desk_instance, desk_pareto_costs, desk_pareto_plan, kind, 0.1, timing)
    n = 15 if kind == "phidelta" else 60
    assert run_trials(a, n, 3, backend="cython") == run_trials(a, n, 3, backend="python")


@needs_ext
def test_backends_identical_on_mixed_families(desk_instance):
    costs = [LogLogistic(1.5, 1.5), Pareto(2.0, 1.3), LogLogistic(1.1, 1.1), Pareto(2.5, 1.9)]
    from casht.costs import Erlang, Hyperexponential

    costs[2] = Erlang(3, 2.0)
    costs[3] = Hyperexponential(0.3, 0.5, 4.0)
    plan = plan_deadlines(costs, "fixed", [2.0, 3.0, 1.5, 1.0])
    a = arm(desk_instance, costs, plan, "nj1", 0.05)
    assert run_trials(a, 80, 9, backend="cython") == run_trials(a, 80, 9, backend="python")


def test_counter_identity(desk_instance, desk_pareto_costs, desk_pareto_plan):
    for r in run_trials(arm(desk_instance, desk_pareto_costs, desk_pareto_plan, "nj1", 0.05), 100, 1):
        assert all(n == e + c for n, e, c in zip(r.n_actions, r.n_eff, r.n_cancel))
        assert sum(r.n_actions) == r.steps
        assert all(c >= 0 for c in r.n_cancel)


@pytest.mark.parametrize("timing", ["ex_ante", "ex_post"])
def test_cost_accounting_replay(monkeypatch, timing, desk_instance, desk_pareto_costs, desk_pareto_plan):
    """total_cost equals the replayed sum of min(C, T) (ex-ante) or C (ex-post)."""
    a = arm(desk_instance, desk_pareto_costs, desk_pareto_plan, "chernoff", 0.05, timing)
    records = run_trials(a, 100, 21, backend="python")
    by_params = {m.kernel_params(): (m, t) for m, t in zip(desk_pareto_costs, desk_pareto_plan.deadlines)}

    drawn = []
    real = _pykernel.draw_cost

    def spy(code, p0, p1, p2, buf):
        c = real(code, p0, p1, p2, buf)
        drawn.append(((p0, p1, p2), c))
        return c

    monkeypatch.setattr(_pykernel, "draw_cost", spy)
    again = run_trials(a, 100, 21, backend="python")
    assert again == records
    i = 0
    for r in records:
        chunk = drawn[i:i + r.steps]
        i += r.steps
        total = 0.0
        for params, c in chunk:
            _, t = by_params[params]
            total += min(c, t) if timing == "ex_ante" else c
        assert total == r.total_cost
    assert i == len(drawn)


def test_ex_post_ignores_plan(desk_instance, desk_pareto_costs, desk_pareto_plan):
    none = plan_deadlines(desk_pareto_costs, "none")
    for kind in ("chernoff", "nj1"):
        with_plan = run_trials(arm(desk_instance, desk_pareto_costs, desk_pareto_plan, kind, 0.05, "ex_post"), 100, 5)
        without = run_trials(arm(desk_instance, desk_pareto_costs, none, kind, 0.05, "ex_post"), 100, 5)
        assert with_plan == without
        assert all(sum(r.n_cancel) == 0 for r in with_plan)


def test_parallel_matches_serial(desk_instance, desk_pareto_costs, desk_pareto_plan):
    a = arm(desk_instance, desk_pareto_costs, desk_pareto_plan, "chernoff", 0.05)
    assert run_trials(a, 40, 2, max_parallelism=1) == run_trials(a, 40, 2, max_parallelism=3)


def test_single_trial_entry_point(desk_instance, desk_pareto_costs, desk_pareto_plan):
    r = run_trial(PolicyConfig("chernoff", 0.01), desk_instance, desk_pareto_costs, desk_pareto_plan,
                  "ex_ante", 3, rng_stream(0, 0))
    assert r.true_hypothesis == 3 and not r.censored
    with pytest.raises(IndexError):
        run_trial(PolicyConfig("chernoff", 0.01), desk_instance, desk_pareto_costs, desk_pareto_plan,
                  "ex_ante", 8, rng_stream(0, 0))


def test_censoring_reported_separately(desk_instance, desk_pareto_costs, desk_pareto_plan):
    a = arm(desk_instance, desk_pareto_costs, desk_pareto_plan, "chernoff", 1e-3, max_steps=40)
    recs = run_trials(a, 50, 4)
    cens = [r for r in recs if r.censored]
    assert cens and all(r.declared == -1 and not r.correct for r in cens)
    s = summarize(recs, desk_pareto_plan.cdf_at_deadlines(desk_pareto_costs))
    assert s.censored == len(cens)
    done = [r.total_cost for r in recs if not r.censored]
    assert s.avg_total_cost == pytest.approx(math.fsum(done) / len(done))


def test_invalid_plans(desk_instance):
    costs = [Pareto(2.0, 1.5)] * 4
    # below x_min every attempt aborts
    dead = dataclasses.replace(plan_deadlines(costs, "fixed", 5.0), deadlines=(1.0,) * 4)
    with pytest.raises(InvalidPlanError):
        prepare_arm(arm(desk_instance, costs, dead))
    heavy = [Pareto(2.0, 0.9)] * 4
    with pytest.raises(InvalidPlanError):
        prepare_arm(arm(desk_instance, heavy, plan_deadlines(heavy, "none"), timing="ex_post"))
    with pytest.raises(InvalidPlanError):
        prepare_arm(arm(desk_instance, costs[:3], plan_deadlines(costs[:3], "none")))


def test_pinned_hypothesis(desk_instance, desk_pareto_costs, desk_pareto_plan):
    recs = run_trials(arm(desk_instance, desk_pareto_costs, desk_pareto_plan, true_hypothesis=5), 20, 1)
    assert {r.true_hypothesis for r in recs} == {5}


def test_wald_identity_small(desk_instance, desk_pareto_costs, desk_pareto_plan):
    s = run_batch(arm(desk_instance, desk_pareto_costs, desk_pareto_plan, "chernoff", 1e-2), 1500, 8)
    checks = wald_consistency(s, desk_pareto_plan, desk_pareto_costs)
    for c in checks:
        if c.effective_samples >= 500:
            assert c.rel_dev_n <= 0.05
    assert s.empirical_error <= 1e-2 + 3 * math.sqrt(1e-2 / 1500)
