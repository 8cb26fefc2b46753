import numpy as np
import pytest
from scipy import integrate, stats

from casht.numerics import rng_stream
from casht.observations import (
    ObservationModel, generate_benchmark_instance, kld, llr, log_density, make_gaussian_model,
    validate_assumptions,
)


def test_kld_matches_integral():
    m = make_gaussian_model([[0.0, 1.0], [2.0, 1.0]])
    f = lambda x: stats.norm.pdf(x, 0.0) * (stats.norm.logpdf(x, 0.0) - stats.norm.logpdf(x, 2.0))
    ref = integrate.quad(f, -20, 20)[0]
    assert kld(m, 0, 1, 0) == pytest.approx(ref, rel=1e-9)
    assert kld(m, 0, 1, 1) == 0.0
    assert m.kld_tensor()[0, 1, 0] == kld(m, 0, 1, 0)


def test_llr_and_density():
    m = make_gaussian_model([[0.0], [1.0]])
    assert log_density(m, 0, 0, 0.3) == pytest.approx(stats.norm.logpdf(0.3), rel=1e-14)
    assert llr(m, 0, 1, 0, 0.3) == pytest.approx(stats.norm.logpdf(0.3) - stats.norm.logpdf(0.3, 1.0), rel=1e-12)
    with pytest.raises(IndexError):
        llr(m, 0, 2, 0, 0.0)
    with pytest.raises(IndexError):
        kld(m, 0, 1, 1)


def test_llr_second_moment_bound():
    m = make_gaussian_model([[0.0, 0.0], [2.0, 0.5]])
    rep = validate_assumptions(m)
    assert rep.llr_second_moment_bound == pytest.approx(4.0 * (1.0 + 1.0))
    x = rng_stream(1).standard_normal(200_000)
    emp = np.mean(np.array([llr(m, 0, 1, 0, float(v)) for v in x[:20000]]) ** 2)
    assert emp == pytest.approx(8.0, rel=0.05)


def test_validation_flags():
    rep = validate_assumptions(make_gaussian_model([[0.0, 1.0], [0.0, 1.0], [1.0, 1.0]]))
    assert rep.indistinguishable_pairs == [(0, 1)]
    assert rep.useless_actions == [1]
    assert not rep.validity_ok
    with pytest.raises(ValueError):
        ObservationModel(np.array([[np.nan, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        ObservationModel(np.array([[1.0, 2.0]]))


def test_benchmark_instance_structure():
    m = generate_benchmark_instance(8, 4, rng_stream(1, 0))
    mu = m.means
    np.testing.assert_array_equal(mu[0, :-1], mu[7, :-1])
    assert mu[0, -1] == 10.0 - mu[7, -1]
    jitter = np.minimum(np.abs(mu[1:7] - 2.0), np.abs(mu[1:7] - 8.0))
    assert np.all(jitter <= 0.1)
    assert validate_assumptions(m).validity_ok
    assert m == generate_benchmark_instance(8, 4, rng_stream(1, 0))
    assert not m.means.flags.writeable


def test_csv_round_trip(tmp_path):
    m = generate_benchmark_instance(5, 3, rng_stream(2, 0))
    assert ObservationModel.from_csv(m.to_csv()) == m
    m.save(tmp_path / "i.csv")
    assert ObservationModel.load(tmp_path / "i.csv") == m
