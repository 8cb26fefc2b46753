"""Per-action deadline selection.

A deadline ``T`` replaces the per-attempt cost ``C`` by ``min(C, T)`` and
throws away the sample when ``C > T``. Its worth is measured by the
effective cost ``kappa(T) = E[min(C, T)] / F(T)``; a deadline helps exactly
when the expected overshoot past ``T`` exceeds the mean cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costs import CostModel, LogLogistic, Pareto, ZeroMassError
from .numerics import RootProblem, find_root_bracketed, minimize_convex_1d

MODES = ("none", "fixed", "median", "optimal", "numeric")
VERDICT_TOL = 1e-9
KAPPA_TOL = 1e-8


class PlanError(ValueError):
    """A per-action planning failure; ``action`` names the offender."""

    def __init__(self, action: int, message: str):
        super().__init__(f"action {action}: {message}")
        self.action = action


@dataclass(frozen=True)
class BenefitVerdict:
    verdict: str  # "improves" | "degrades" | "neutral"
    overshoot_minus_mean: float


def benefit_verdict(model: CostModel, t: float) -> BenefitVerdict:
    """Does deadline ``t`` lower the effective cost below the mean?

    Infinite-mean costs always improve; ``t = inf`` (or ``F(t) = 1``) is
    neutral; otherwise the sign of ``overshoot(t) - mean`` decides, with ties
    inside a relative 1e-9 band reported as neutral.
    """
    if math.isinf(t):
        return BenefitVerdict("neutral", 0.0)
    f = model.cdf(t)
    if f <= 0.0:
        raise ZeroMassError(f"{model}: F({t}) = 0")
    mean = model.mean
    if math.isinf(mean):
        return BenefitVerdict("improves", math.inf)
    if f >= 1.0:
        return BenefitVerdict("neutral", 0.0)
    diff = model.overshoot(t) - mean
    if abs(diff) <= VERDICT_TOL * max(1.0, mean):
        return BenefitVerdict("neutral", diff)
    return BenefitVerdict("improves" if diff > 0 else "degrades", diff)


# ---------------------------------------------------------------------------
# Pareto
# ---------------------------------------------------------------------------

def pareto_foc(tau: float, alpha: float) -> float:
    """Numerator of d kappa / d tau for Pareto costs, ``tau = T / x_min``."""
    return (alpha - 1.0) * tau ** alpha - alpha * alpha * tau ** (alpha - 1.0) + 1.0


@dataclass(frozen=True)
class ParetoOptimum:
    T_star: float
    kappa_star: float
    tau_star: float
    mean_infinite: bool


def pareto_tau_star(alpha: float, tol: float = 1e-13) -> float:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if alpha == 1.0:
        # the polynomial vanishes identically; its alpha-derivative at 1 takes over
        g = lambda tau: tau - 2.0 - math.log(tau)  # noqa: E731
    else:
        g = lambda tau: pareto_foc(tau, alpha)  # noqa: E731
    lo, hi = 1.0 + 1e-9, 2.0
    glo = g(lo)
    while (g(hi) > 0) == (glo > 0):
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError(f"could not bracket the optimal deadline for alpha={alpha}")
    return find_root_bracketed(RootProblem(g, lo, hi, tol))


def pareto_optimal_deadline(x_min: float, alpha: float) -> ParetoOptimum:
    """Minimiser of the (convex) Pareto effective cost.

    ``T* = x_min * tau*(alpha)`` where ``tau* > 1`` is the root of
    ``(alpha-1) tau^alpha - alpha^2 tau^(alpha-1) + 1``. For ``alpha <= 1`` the
    mean is infinite but the effective cost still has a finite minimiser; it
    is returned with ``mean_infinite`` set.
    """
    model = Pareto(x_min, alpha)
    tau = pareto_tau_star(alpha)
    t = x_min * tau
    return ParetoOptimum(t, model.kappa(t), tau, alpha <= 1.0)


# ---------------------------------------------------------------------------
# Log-logistic and generic rules
# ---------------------------------------------------------------------------

def loglogistic_median_deadline(alpha: float, beta: float) -> float:
    """The median ``alpha``; never worse than no deadline when ``1 < beta <= 2``."""
    LogLogistic(alpha, beta)
    return float(alpha)


def numeric_optimal_deadline(model: CostModel, lo: float, hi: float, tol: float = 1e-9):
    """Minimise ``kappa`` over ``[lo, hi]``.

    Convex families use golden-section search; the rest a 1024-point log grid
    refined by golden section around the best cell. Returns ``(T, kappa(T))``,
    or ``None`` when the minimum does not beat the mean by more than the
    comparison tolerance.
    """
    if not 0 < lo < hi:
        raise ValueError(f"invalid search interval [{lo}, {hi}]")
    if model.cdf(lo) <= 0.0:
        raise ZeroMassError(f"{model}: F({lo}) = 0 at the left end of the search interval")
    if model.convex_kappa:
        t, k = minimize_convex_1d(model.kappa, lo, hi, tol * max(1.0, lo))
    else:
        grid = np.geomspace(lo, hi, 1024)
        vals = np.array([model.kappa(float(x)) for x in grid])
        i = int(np.argmin(vals))
        a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, len(grid) - 1)])
        t, k = minimize_convex_1d(model.kappa, a, b, tol * max(1.0, a))
        if vals[i] < k:
            t, k = float(grid[i]), float(vals[i])
    mean = model.mean
    if math.isfinite(mean) and k >= mean - KAPPA_TOL * max(1.0, mean):
        return None
    return t, k


def default_search_interval(model: CostModel) -> tuple[float, float]:
    med = model.median
    lo = med * 1e-3
    if isinstance(model, Pareto):
        lo = model.x_min * (1.0 + 1e-6)
    return lo, med * 1e3


@dataclass(frozen=True)
class DeadlinePlan:
    deadlines: tuple[float, ...]
    mode: str
    effective_costs: tuple[float, ...]
    mean_infinite: tuple[bool, ...] = ()

    def __len__(self):
        return len(self.deadlines)

    def cdf_at_deadlines(self, models: Sequence[CostModel]) -> tuple[float, ...]:
        return tuple(1.0 if math.isinf(t) else m.cdf(t) for m, t in zip(models, self.deadlines))


def _optimal_for(model: CostModel) -> float:
    if isinstance(model, Pareto):
        return pareto_optimal_deadline(model.x_min, model.alpha).T_star
    if isinstance(model, LogLogistic):
        t = loglogistic_median_deadline(model.alpha, model.beta)
        return math.inf if benefit_verdict(model, t).verdict == "degrades" else t
    found = numeric_optimal_deadline(model, *default_search_interval(model))
    return math.inf if found is None else found[0]


def plan_deadlines(models: Sequence[CostModel], mode: str, fixed_values=None) -> DeadlinePlan:
    """Pick ``T_a`` for every action according to ``mode``.

    ``none``: no deadlines. ``fixed``: caller-supplied values. ``median``:
    each family's median. ``optimal``: Pareto root, log-logistic median, a
    numeric search otherwise, and no deadline wherever one cannot help.
    ``numeric``: the numeric search for every action.
    """
    if mode not in MODES:
        raise ValueError(f"unknown deadline mode {mode!r}; choose from {MODES}")
    models = list(models)
    if (fixed_values is not None) != (mode == "fixed"):
        raise ValueError("fixed_values must be given exactly when mode is 'fixed'")
    if mode == "fixed":
        vals = np.broadcast_to(np.asarray(fixed_values, dtype=float), (len(models),))
    deadlines, kappas = [], []
    for a, m in enumerate(models):
        try:
            if mode == "none":
                t = math.inf
            elif mode == "fixed":
                t = float(vals[a])
                if not t > 0:
                    raise ValueError(f"deadline must be positive, got {t}")
            elif mode == "median":
                t = m.median
            elif mode == "optimal":
                t = _optimal_for(m)
            else:
                found = numeric_optimal_deadline(m, *default_search_interval(m))
                t = math.inf if found is None else found[0]
            k = m.kappa(t)
        except PlanError:
            raise
        except (ValueError, ArithmeticError) as exc:
            raise PlanError(a, str(exc)) from exc
        deadlines.append(float(t))
        kappas.append(float(k))
    return DeadlinePlan(tuple(deadlines), mode, tuple(kappas), tuple(not m.mean_is_finite for m in models))
