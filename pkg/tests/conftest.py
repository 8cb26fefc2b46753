import numpy as np
import pytest

from casht.costs import Pareto
from casht.deadlines import plan_deadlines
from casht.numerics import rng_stream
from casht.observations import generate_benchmark_instance


@pytest.fixture(scope="session")
def desk_instance():
    return generate_benchmark_instance(8, 4, rng_stream(1, 0))


@pytest.fixture(scope="session")
def desk_pareto_costs():
    rng = rng_stream(7, 0)
    return [Pareto(float(rng.uniform(2, 3)), float(rng.uniform(1.1, 2))) for _ in range(4)]


@pytest.fixture(scope="session")
def desk_pareto_plan(desk_pareto_costs):
    return plan_deadlines(desk_pareto_costs, "optimal")


@pytest.fixture(scope="session")
def small_instance():
    # three hypotheses, two actions; hypotheses 0 and 1 only differ under action 1
    from casht.observations import make_gaussian_model

    return make_gaussian_model(np.array([[0.0, 0.0], [0.0, 1.5], [2.0, 1.0]]))


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
