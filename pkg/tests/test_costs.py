import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from casht.costs import (
    AllCensoredError, Erlang, Exponential, Hyperexponential, LogLogistic, Pareto, ZeroMassError,
    kappa_mc_oracle, make_cost_model,
)
from casht.numerics import rng_stream


def scipy_dist(m):
    if isinstance(m, Exponential):
        return stats.expon(scale=1 / m.rate)
    if isinstance(m, Erlang):
        return stats.gamma(m.k, scale=1 / m.rate)
    if isinstance(m, Pareto):
        return stats.pareto(m.alpha, scale=m.x_min)
    if isinstance(m, LogLogistic):
        return stats.fisk(m.beta, scale=m.alpha)
    raise TypeError(m)


def quad_truncated_mean(m, t):
    # E[min(C, T)] = int_0^T S(c) dc
    lo = m.x_min if isinstance(m, Pareto) else 0.0
    base = lo if isinstance(m, Pareto) else 0.0
    if t <= lo:
        return t
    return base + integrate.quad(m.sf, lo, t, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


MODELS = [
    Exponential(1.3), Erlang(2, 1.0), Erlang(5, 0.7), Hyperexponential(0.5, 1.0, 10.0),
    Pareto(1.0, 1.5), Pareto(2.5, 1.8), LogLogistic(4.0, 1.5), LogLogistic(1.3, 2.5),
]


@pytest.mark.parametrize("m", MODELS, ids=str)
def test_truncated_mean_matches_quadrature(m):
    for t in (0.3 * m.median, m.median, 2.0 * m.median, 6.0 * m.median):
        assert m.truncated_mean(t) == pytest.approx(quad_truncated_mean(m, t), rel=1e-8)


@pytest.mark.parametrize("m", [x for x in MODELS if not isinstance(x, Hyperexponential)], ids=str)
def test_cdf_and_mean_against_scipy(m):
    d = scipy_dist(m)
    for t in (0.5 * m.median, m.median, 3.0 * m.median):
        assert m.cdf(t) == pytest.approx(d.cdf(t), rel=1e-12, abs=1e-15)
    assert m.mean == pytest.approx(d.mean(), rel=1e-10)
    assert m.median == pytest.approx(d.median(), rel=1e-10)


@pytest.mark.parametrize("m", MODELS, ids=str)
def test_overshoot_decomposition(m):
    # mean = E[min(C,T)] + (1 - F) * overshoot
    for t in (0.5 * m.median, 2.0 * m.median, 10.0 * m.median):
        lhs = m.truncated_mean(t) + m.sf(t) * m.overshoot(t)
        assert lhs == pytest.approx(m.mean, rel=1e-9)


def test_loglogistic_frozen_values():
    m = LogLogistic(4.0, 1.5)
    assert m.truncated_mean(4.0) == pytest.approx(2.988406, abs=1e-6)
    assert m.kappa(4.0) == pytest.approx(5.976812, abs=1e-6)
    assert m.mean == pytest.approx(4 * math.pi / 1.5 / math.sin(math.pi / 1.5), rel=1e-13)


def test_pareto_closed_form_kappa():
    m = Pareto(1.0, 1.5)
    assert m.mean == 3.0
    assert m.kappa(1.5) == pytest.approx(3.0, abs=1e-12)
    assert m.kappa(3.41825) == pytest.approx(2.27883, abs=1e-5)
    with pytest.raises(ZeroMassError):
        m.kappa(1.0)
    assert m.kappa(math.inf) == 3.0


def test_pareto_heavy_tail_means():
    assert math.isinf(Pareto(1.0, 1.0).mean)
    assert math.isinf(Pareto(1.0, 0.8).mean)
    assert math.isfinite(Pareto(1.0, 0.8).kappa(5.0))
    assert math.isinf(LogLogistic(1.0, 0.9).mean)
    assert math.isfinite(LogLogistic(1.0, 0.9).kappa(2.0))


def test_exponential_memoryless():
    m = Exponential(2.0)
    for t in np.geomspace(1e-4, 20, 30):
        assert m.kappa(float(t)) == pytest.approx(0.5, abs=1e-12)
        assert m.overshoot(float(t)) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.floats(0.1, 10.0), st.floats(1e-3, 30.0))
def test_erlang_overshoot_below_mean(k, rate, t_scaled):
    m = Erlang(k, rate)
    assert m.overshoot(t_scaled / rate) < m.mean


@settings(max_examples=80, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(1e-3, 20.0))
def test_hyperexponential_overshoot_above_mean(p, r1, r2, t):
    if abs(r1 - r2) < 1e-3 * max(r1, r2):
        return
    m = Hyperexponential(p, r1, r2)
    assert m.overshoot(t) > m.mean


@settings(max_examples=80, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(1.05, 4.0), st.floats(1.001, 50.0))
def test_pareto_deadline_helps_iff_above_alpha_xmin(x_min, alpha, tau):
    m = Pareto(x_min, alpha)
    t = tau * x_min
    if abs(tau - alpha) < 1e-6:
        return
    assert (m.kappa(t) < m.mean) == (tau > alpha)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 10.0), st.floats(1.05, 2.0))
def test_loglogistic_median_never_hurts_when_beta_at_most_two(alpha, beta):
    m = LogLogistic(alpha, beta)
    assert m.kappa(alpha) <= m.mean * (1 + 1e-12)


def test_loglogistic_reversal_above_two():
    for beta in (2.2, 2.5, 3.0):
        m = LogLogistic(4.0, beta)
        assert m.kappa(4.0) > m.mean
    m = LogLogistic(4.0, 2.0)
    assert m.kappa(4.0) == pytest.approx(m.mean, rel=1e-12)


@pytest.mark.parametrize("beta", [1.1, 1.5, 2.0])
def test_loglogistic_kappa_is_u_shaped(beta):
    m = LogLogistic(4.0, beta)
    grid = np.geomspace(0.04, 400.0, 100)
    k = np.array([m.kappa(float(t)) for t in grid])
    i = int(np.argmin(k))
    assert 0 < i < len(grid) - 1
    assert np.all(np.diff(k[: i + 1]) < 0) and np.all(np.diff(k[i:]) > 0)
    assert k[i] < m.mean


@pytest.mark.parametrize("m", MODELS, ids=str)
def test_stream_sampler_matches_vectorised_in_law(m):
    a = m.sample_many(4000, rng_stream(3, 0))
    g = rng_stream(3, 1)
    b = np.array([m.sample(g) for _ in range(4000)])
    assert stats.ks_2samp(a, b).pvalue > 1e-4


def test_stream_sampler_matches_kernel_draw():
    from casht import _pykernel

    for m in MODELS:
        buf1 = _pykernel.DrawBuffer(rng_stream(8, 0))
        buf2 = _pykernel.DrawBuffer(rng_stream(8, 0))
        for _ in range(50):
            assert m.sample(buf1) == _pykernel.draw_cost(m.code, *m.kernel_params(), buf2)


@pytest.mark.parametrize("m", [x for x in MODELS if not isinstance(x, Hyperexponential)], ids=str)
def test_samples_follow_cdf(m):
    x = m.sample_many(20000, rng_stream(9, 1))
    assert stats.kstest(x, scipy_dist(m).cdf).pvalue > 1e-4


def test_mc_oracle_within_stderr():
    m = Pareto(1.0, 1.5)
    est = kappa_mc_oracle(m, 3.41825, 200_000, rng_stream(4, 0))
    assert abs(est.estimate - m.kappa(3.41825)) <= 4 * est.stderr
    with pytest.raises(ValueError):
        kappa_mc_oracle(m, 2.0, 10, rng_stream(4, 0))
    with pytest.raises(ZeroMassError):
        kappa_mc_oracle(m, 0.5, 1000, rng_stream(4, 0))


def test_mc_oracle_all_censored():
    m = Pareto(1.0, 1.5)
    with pytest.raises(AllCensoredError):
        kappa_mc_oracle(m, 1.0 + 1e-15, 1000, rng_stream(4, 0))


def test_constructor_validation():
    for bad in (lambda: Exponential(0.0), lambda: Erlang(0, 1.0), lambda: Erlang(2.5, 1.0),
                lambda: Hyperexponential(1.5, 1, 2), lambda: Pareto(-1, 2), lambda: LogLogistic(1, 0)):
        with pytest.raises(ValueError):
            bad()
    with pytest.raises(ValueError):
        make_cost_model("weibull", 1.0)
    assert make_cost_model("pareto", 1, 1.5) == Pareto(1.0, 1.5)
