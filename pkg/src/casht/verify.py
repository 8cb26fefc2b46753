"""Property suites behind ``casht verify``.

Each check is a small, fast statement about the cost models or the deadline
planner, evaluated on a fixed grid. ``run_all`` returns one result per check;
the CLI exits nonzero when any of them fails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .costs import Erlang, Exponential, Hyperexponential, LogLogistic, Pareto
from .deadlines import pareto_foc, pareto_optimal_deadline, pareto_tau_star
from .numerics import incomplete_beta


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _pareto_optimum() -> tuple[bool, str]:
    opt = pareto_optimal_deadline(1.0, 1.5)
    resid = abs(pareto_foc(opt.tau_star, 1.5))
    ok = abs(opt.T_star - 3.41825) <= 1e-3 and resid <= 1e-6
    return ok, f"T*={opt.T_star:.6f} kappa*={opt.kappa_star:.6f} |poly|={resid:.1e}"


def _pareto_closed_form_root() -> tuple[bool, str]:
    tau = pareto_tau_star(2.0)
    return abs(tau - (2.0 + math.sqrt(3.0))) <= 1e-9, f"tau*(2)={tau!r}"


def _pareto_crossing() -> tuple[bool, str]:
    m = Pareto(1.0, 1.5)
    at = m.kappa(1.5)
    above = all(m.kappa(t) > 3.0 for t in (1.1, 1.3))
    below = all(m.kappa(t) < 3.0 for t in (2.0, 5.0, 10.0))
    return abs(at - 3.0) <= 1e-6 and above and below, f"kappa(1.5)={at!r}"


def _pareto_threshold_sweep() -> tuple[bool, str]:
    # a deadline helps exactly when T > alpha * x_min
    bad = []
    for alpha in (1.2, 1.5, 2.0, 3.0):
        m = Pareto(1.0, alpha)
        for t in np.linspace(1.01, 20.0, 60):
            helps = m.kappa(float(t)) < m.mean
            if helps != (t > alpha):
                bad.append((alpha, float(t)))
    return not bad, f"{len(bad)} mismatches"


def _erlang_overshoot() -> tuple[bool, str]:
    worst = -math.inf
    for k in (2, 3, 5):
        for rate in (0.5, 1.0, 4.0):
            m = Erlang(k, rate)
            for t in np.geomspace(1e-3, 50.0, 40) / rate:
                worst = max(worst, m.overshoot(float(t)) - m.mean)
    return worst < 0.0, f"max(overshoot-mean)={worst:.3g}"


def _hyperexp_overshoot() -> tuple[bool, str]:
    worst = math.inf
    for p, r1, r2 in ((0.5, 1.0, 10.0), (0.1, 0.2, 5.0), (0.9, 3.0, 0.5)):
        m = Hyperexponential(p, r1, r2)
        for t in np.geomspace(1e-3, 20.0, 40):
            worst = min(worst, m.overshoot(float(t)) - m.mean)
    return worst > 0.0, f"min(overshoot-mean)={worst:.3g}"


def _exponential_memoryless() -> tuple[bool, str]:
    dev = 0.0
    for rate in (0.3, 1.0, 7.0):
        m = Exponential(rate)
        for t in np.geomspace(1e-3, 30.0, 40) / rate:
            dev = max(dev, abs(m.kappa(float(t)) - m.mean))
    return dev <= 1e-9, f"max|kappa-mean|={dev:.2g}"


def _loglogistic_median_rule() -> tuple[bool, str]:
    bad = []
    for beta in np.linspace(1.05, 2.0, 20):
        m = LogLogistic(4.0, float(beta))
        if m.kappa(4.0) > m.mean * (1.0 + 1e-12):
            bad.append(float(beta))
    m = LogLogistic(4.0, 2.5)
    reversed_ = m.kappa(4.0) > m.mean
    return not bad and reversed_, f"violations={bad} reversal_at_2.5={reversed_}"


def _loglogistic_shape() -> tuple[bool, str]:
    # kappa falls from +inf at 0, dips below the mean and climbs back towards it
    notes = []
    ok = True
    for beta in (1.1, 1.5, 2.0):
        m = LogLogistic(4.0, beta)
        grid = np.geomspace(0.04, 400.0, 100)
        k = np.array([m.kappa(float(t)) for t in grid])
        i = int(np.argmin(k))
        ok &= 0 < i < len(grid) - 1 and k[0] > k[1] and k[i] < m.mean
        notes.append(f"beta={beta}: min {k[i]:.4g} at T={grid[i]:.3g}")
    return bool(ok), "; ".join(notes)


def _beta_quadrature() -> tuple[bool, str]:
    worst = 0.0
    for x, a, b in ((0.5, 2 / 3, 1 / 3), (0.3, 0.5, 0.5), (0.9, 2.0, 3.0), (0.5, 0.4, 0.6), (0.75, 1.5, 0.25)):
        # substitution u = t^a removes the left singularity
        f = lambda u: (1.0 - u ** (1.0 / a)) ** (b - 1.0) / a  # noqa: E731
        q, _ = integrate.quad(f, 0.0, x ** a, epsabs=1e-14, epsrel=1e-13, limit=200)
        worst = max(worst, abs(q - incomplete_beta(x, a, b)))
    return worst <= 1e-8, f"max dev={worst:.2g}"


def _figure7_flip() -> tuple[bool, str]:
    def holds(beta):
        b = 1.0 / beta
        return 2.0 * b * incomplete_beta(0.5, b, 1.0 - b) <= incomplete_beta(1.0, 1.0 - b, 1.0 + b) * (1 + 1e-12)
    below = all(holds(1.0 + k / 100.0) for k in range(1, 101))
    above = not any(holds(2.0 + k / 100.0) for k in range(1, 101))
    return below and above, f"holds on (1,2]: {below}; fails on (2,3]: {above}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "pareto_optimum": _pareto_optimum,
    "pareto_closed_form_root": _pareto_closed_form_root,
    "pareto_crossing": _pareto_crossing,
    "pareto_threshold_sweep": _pareto_threshold_sweep,
    "erlang_overshoot_below_mean": _erlang_overshoot,
    "hyperexponential_overshoot_above_mean": _hyperexp_overshoot,
    "exponential_memoryless": _exponential_memoryless,
    "loglogistic_median_rule": _loglogistic_median_rule,
    "loglogistic_interior_minimum": _loglogistic_shape,
    "incomplete_beta_quadrature": _beta_quadrature,
    "beta_inequality_flip": _figure7_flip,
}


def run_all() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, reported not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
