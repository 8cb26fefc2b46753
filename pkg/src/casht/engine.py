"""Trial and batch execution.

A trial repeatedly asks the policy for an action, draws that action's cost
and, unless the cost overshoots the deadline (ex-ante timing only), a sample
from the true hypothesis. The inner loop lives in a compiled kernel when one
is available (``casht._kernel``) and in ``casht._pykernel`` otherwise; set
``CASHT_PURE_PYTHON=1`` to force the fallback. Both give identical records.

Trial ``t`` of a batch draws everything, including its true hypothesis, from
``rng_stream(seed, t)``, so a batch is a pure function of ``(arm, trials,
seed)`` regardless of how trials are spread over worker processes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _pykernel
from .costs import CostModel
from .deadlines import DeadlinePlan
from .numerics import rng_stream
from .observations import ObservationModel
from .policies import PolicyConfig, stage_threshold, weight_table

try:
    from . import _kernel as _ckernel
except ImportError:  # pragma: no cover - depends on the build
    _ckernel = None

TIMINGS = ("ex_ante", "ex_post")
DEFAULT_MAX_STEPS = 1_000_000
_KIND_CODES = {"chernoff": _pykernel.CHERNOFF, "nj1": _pykernel.NJ1, "phidelta": _pykernel.PHIDELTA}


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _ckernel is not None else ("python",)


def default_backend() -> str:
    if os.environ.get("CASHT_PURE_PYTHON") or _ckernel is None:
        return "python"
    return "cython"


class InvalidPlanError(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    true_hypothesis: int
    declared: int
    total_cost: float
    n_actions: tuple[int, ...]
    n_eff: tuple[int, ...]
    n_cancel: tuple[int, ...]
    steps: int
    correct: bool
    censored: bool = False


@dataclass(frozen=True, eq=False)
class Arm:
    """Everything a batch needs except the trial count and seed.

    ``true_hypothesis=None`` redraws the hypothesis uniformly per trial; an
    index pins it (conditional-on-hypothesis diagnostics).
    """

    policy: PolicyConfig
    observations: ObservationModel
    costs: tuple[CostModel, ...]
    plan: DeadlinePlan
    timing: str = "ex_ante"
    max_steps: int = DEFAULT_MAX_STEPS
    true_hypothesis: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))


@dataclass(frozen=True)
class _Prepared:
    kind: int
    h: int
    n_act: int
    means: np.ndarray
    kld: np.ndarray
    weights: np.ndarray
    codes: np.ndarray
    params: np.ndarray
    deadlines: np.ndarray
    kappa: np.ndarray
    delta: float
    rho: float
    threshold: float
    max_steps: int
    ex_ante: bool
    true_hypothesis: int | None
    lists: dict = field(default_factory=dict, repr=False)


def effective_costs_for(policy: PolicyConfig, costs: Sequence[CostModel], plan: DeadlinePlan, timing: str):
    """Costs the policy optimises against.

    Ex-ante uses the plan's effective costs; ex-post ignores deadlines (they
    cannot take effect before the sample arrives) and uses the means.
    """
    if policy.effective_costs is not None:
        return np.asarray(policy.effective_costs, dtype=float)
    if timing == "ex_ante":
        return np.asarray(plan.effective_costs, dtype=float)
    means = np.array([m.mean for m in costs])
    if not np.all(np.isfinite(means)):
        raise InvalidPlanError("ex-post timing needs finite mean costs for every action")
    return means


def prepare(policy: PolicyConfig, obs: ObservationModel, costs: Sequence[CostModel], plan: DeadlinePlan,
            timing: str, max_steps: int = DEFAULT_MAX_STEPS, true_hypothesis: int | None = None) -> _Prepared:
    if timing not in TIMINGS:
        raise ValueError(f"timing must be one of {TIMINGS}, got {timing!r}")
    costs = list(costs)
    h, n_act = obs.n_hypotheses, obs.n_actions
    if len(costs) != n_act or len(plan) != n_act:
        raise InvalidPlanError(f"{n_act} actions but {len(costs)} cost models and {len(plan)} deadlines")
    if timing == "ex_ante":
        for a, (m, t) in enumerate(zip(costs, plan.deadlines)):
            if not math.isinf(t) and not m.cdf(t) > 0.0:
                raise InvalidPlanError(f"action {a}: F({t}) = 0 under {m}; every attempt would abort")
    kappa = effective_costs_for(policy, costs, plan, timing)
    if kappa.shape != (n_act,) or not np.all(np.isfinite(kappa)) or np.any(kappa <= 0):
        raise InvalidPlanError(f"effective costs must be finite and positive, got {kappa.tolist()}")
    kind = _KIND_CODES[policy.kind]
    if kind == _pykernel.PHIDELTA:
        weights = np.zeros((h + 1, n_act))
    else:
        weights = weight_table(obs, tuple(kappa.tolist()), policy.game_tol)
    deadlines = np.array(plan.deadlines if timing == "ex_ante" else [math.inf] * n_act, dtype=float)
    if true_hypothesis is not None and not 0 <= true_hypothesis < h:
        raise IndexError(f"true hypothesis {true_hypothesis} out of range")
    return _Prepared(
        kind=kind, h=h, n_act=n_act,
        means=np.ascontiguousarray(obs.means, dtype=float).ravel(),
        kld=np.ascontiguousarray(obs.kld_tensor(), dtype=float).ravel(),
        weights=np.ascontiguousarray(weights, dtype=float).ravel(),
        codes=np.array([m.code for m in costs], dtype=np.int64),
        params=np.array([m.kernel_params() for m in costs], dtype=float).ravel(),
        deadlines=deadlines,
        kappa=np.ascontiguousarray(kappa),
        delta=float(policy.delta), rho=float(policy.rho_tilde),
        threshold=stage_threshold(h, policy.delta),
        max_steps=int(max_steps), ex_ante=timing == "ex_ante",
        true_hypothesis=true_hypothesis,
    )


def prepare_arm(arm: Arm) -> _Prepared:
    return prepare(arm.policy, arm.observations, arm.costs, arm.plan, arm.timing, arm.max_steps, arm.true_hypothesis)


def _as_lists(p: _Prepared) -> dict:
    if not p.lists:
        p.lists.update(
            means=p.means.tolist(), kld=p.kld.tolist(), weights=p.weights.tolist(), codes=p.codes.tolist(),
            params=p.params.tolist(), deadlines=p.deadlines.tolist(), kappa=p.kappa.tolist(),
        )
    return p.lists


def _run_prepared(p: _Prepared, true_h: int, gen: np.random.Generator, backend: str) -> TrialRecord:
    if backend == "cython":
        if _ckernel is None:
            raise RuntimeError("compiled kernel is not available; use backend='python'")
        buf = _ckernel.DrawBuffer(gen)
        out = _ckernel.run_trial(p.kind, p.h, p.n_act, p.means, p.kld, p.weights, p.codes, p.params,
                                 p.deadlines, p.kappa, p.delta, p.rho, p.threshold, p.max_steps,
                                 true_h, p.ex_ante, buf)
    elif backend == "python":
        lists = _as_lists(p)
        buf = _pykernel.DrawBuffer(gen)
        out = _pykernel.run_trial(p.kind, p.h, p.n_act, lists["means"], lists["kld"], lists["weights"],
                                  lists["codes"], lists["params"], lists["deadlines"], lists["kappa"],
                                  p.delta, p.rho, p.threshold, p.max_steps, true_h, p.ex_ante, buf)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    declared, total, steps, n_tot, n_eff, censored = out
    return TrialRecord(
        true_hypothesis=int(true_h),
        declared=int(declared),
        total_cost=float(total),
        n_actions=tuple(n_tot),
        n_eff=tuple(n_eff),
        n_cancel=tuple(t - e for t, e in zip(n_tot, n_eff)),
        steps=int(steps),
        correct=(not censored) and declared == true_h,
        censored=bool(censored),
    )


def run_trial(policy: PolicyConfig, obs: ObservationModel, costs: Sequence[CostModel], plan: DeadlinePlan,
              timing: str, true_hypothesis: int, stream: np.random.Generator,
              max_steps: int = DEFAULT_MAX_STEPS, backend: str | None = None) -> TrialRecord:
    p = prepare(policy, obs, costs, plan, timing, max_steps)
    if not 0 <= true_hypothesis < obs.n_hypotheses:
        raise IndexError(f"true hypothesis {true_hypothesis} out of range")
    return _run_prepared(p, true_hypothesis, stream, backend or default_backend())


def _trial_from_seed(p: _Prepared, seed: int, t: int, backend: str) -> TrialRecord:
    gen = rng_stream(seed, t)
    true_h = p.true_hypothesis if p.true_hypothesis is not None else int(gen.integers(p.h))
    return _run_prepared(p, true_h, gen, backend)


def _run_chunk(p: _Prepared, seed: int, start: int, stop: int, backend: str) -> list[TrialRecord]:
    return [_trial_from_seed(p, seed, t, backend) for t in range(start, stop)]


def run_trials(arm: Arm, trials: int, seed: int, max_parallelism: int = 1,
               backend: str | None = None, prepared: _Prepared | None = None) -> list[TrialRecord]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    backend = backend or default_backend()
    p = prepared or prepare_arm(arm)
    workers = max(1, min(int(max_parallelism), trials))
    if workers == 1:
        return _run_chunk(p, seed, 0, trials, backend)
    bounds = np.linspace(0, trials, workers * 4 + 1).astype(int)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_chunk, p, seed, a, b, backend) for a, b in chunks]
        records: list[TrialRecord] = []
        for fut in futures:
            records.extend(fut.result())
    return records


@dataclass(frozen=True)
class BatchSummary:
    trials: int
    completed: int
    censored: int
    avg_total_cost: float
    stderr: float
    empirical_error: float
    mean_n: tuple[float, ...]
    mean_n_eff: tuple[float, ...]
    mean_n_cancel: tuple[float, ...]
    total_n_eff: tuple[int, ...]
    cdf_at_deadline: tuple[float, ...]
    wald_ratio: tuple[float, ...]

    @property
    def avg_n(self) -> float:
        return math.fsum(self.mean_n)

    @property
    def avg_n_eff(self) -> float:
        return math.fsum(self.mean_n_eff)

    @property
    def avg_n_cancel(self) -> float:
        return math.fsum(self.mean_n_cancel)


def summarize(records: Sequence[TrialRecord], cdf_at_deadline: Sequence[float]) -> BatchSummary:
    """Aggregate in record order (fixed), excluding censored trials from every mean."""
    done = [r for r in records if not r.censored]
    n = len(done)
    n_act = len(cdf_at_deadline)
    if n == 0:
        nan = (math.nan,) * n_act
        return BatchSummary(len(records), 0, len(records), math.nan, math.nan, math.nan, nan, nan, nan,
                            (0,) * n_act, tuple(cdf_at_deadline), nan)
    costs = [r.total_cost for r in done]
    avg = math.fsum(costs) / n
    stderr = math.sqrt(math.fsum((c - avg) ** 2 for c in costs) / (n - 1) / n) if n > 1 else 0.0
    err = sum(1 for r in done if not r.correct) / n
    mean_n = tuple(math.fsum(r.n_actions[a] for r in done) / n for a in range(n_act))
    tot_eff = tuple(sum(r.n_eff[a] for r in done) for a in range(n_act))
    mean_eff = tuple(e / n for e in tot_eff)
    mean_cancel = tuple(math.fsum(r.n_cancel[a] for r in done) / n for a in range(n_act))
    wald = tuple(
        mean_n[a] / (mean_eff[a] / cdf_at_deadline[a]) if mean_eff[a] > 0 else math.nan for a in range(n_act)
    )
    return BatchSummary(
        trials=len(records), completed=n, censored=len(records) - n,
        avg_total_cost=avg, stderr=stderr, empirical_error=err,
        mean_n=mean_n, mean_n_eff=mean_eff, mean_n_cancel=mean_cancel, total_n_eff=tot_eff,
        cdf_at_deadline=tuple(float(f) for f in cdf_at_deadline), wald_ratio=wald,
    )


def arm_cdf_at_deadline(arm: Arm) -> tuple[float, ...]:
    if arm.timing == "ex_post":
        return (1.0,) * len(arm.costs)
    return arm.plan.cdf_at_deadlines(arm.costs)


def run_batch(arm: Arm, trials: int, seed: int, max_parallelism: int = 1,
              backend: str | None = None, prepared: _Prepared | None = None) -> BatchSummary:
    records = run_trials(arm, trials, seed, max_parallelism, backend, prepared)
    return summarize(records, arm_cdf_at_deadline(arm))


@dataclass(frozen=True)
class WaldCheck:
    action: int
    cdf: float
    effective_samples: int
    mean_n: float
    predicted_n: float
    rel_dev_n: float
    mean_cancel: float
    predicted_cancel: float
    rel_dev_cancel: float


def _rel(observed: float, predicted: float) -> float:
    if predicted == 0.0:
        return 0.0 if observed == 0.0 else math.inf
    return abs(observed - predicted) / predicted


def wald_consistency(summary: BatchSummary, plan: DeadlinePlan, costs: Sequence[CostModel]) -> list[WaldCheck]:
    """Compare attempt and abort counts with ``N_eff / F(T)`` and ``N_eff (1/F(T) - 1)``.

    Only actions that produced at least one sample are reported.
    """
    cdf = plan.cdf_at_deadlines(costs)
    out = []
    for a, f in enumerate(cdf):
        eff = summary.mean_n_eff[a]
        if not eff > 0:
            continue
        pred_n = eff / f
        pred_c = eff * (1.0 / f - 1.0)
        out.append(WaldCheck(
            action=a, cdf=f, effective_samples=summary.total_n_eff[a],
            mean_n=summary.mean_n[a], predicted_n=pred_n, rel_dev_n=_rel(summary.mean_n[a], pred_n),
            mean_cancel=summary.mean_n_cancel[a], predicted_cancel=pred_c,
            rel_dev_cancel=_rel(summary.mean_n_cancel[a], pred_c),
        ))
    return out
