"""Cost-aware action selection and stopping rules.

Three policies share the effective per-action costs ``kappa``:

* ``chernoff``: draw actions from the distribution maximising worst-case
  divergence per unit cost against the currently believed hypothesis; stop
  once a posterior exceeds ``1 - delta``.
* ``nj1``: as ``chernoff``, but while no posterior exceeds ``rho_tilde`` draw
  from an exploration distribution built over all hypothesis pairs.
* ``phidelta``: deterministic stages; each stage repeats the action with the
  best worst-case separation per cost among alive hypotheses until a stage
  winner emerges, then prunes the hypotheses it beat.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .numerics import RatioGame, solve_ratio_game
from .observations import ObservationModel

ABSTAIN = None
POLICY_KINDS = ("chernoff", "nj1", "phidelta")


class DegenerateWeightsError(ValueError):
    """The believed hypothesis cannot be separated from anything."""


class NoSeparatingActionError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    delta: float
    rho_tilde: float = 0.75
    effective_costs: tuple[float, ...] | None = None
    game_tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; choose from {POLICY_KINDS}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.5 < self.rho_tilde < 1.0:
            raise ValueError(f"rho_tilde must lie in (0.5, 1), got {self.rho_tilde}")
        if self.effective_costs is not None:
            object.__setattr__(self, "effective_costs", tuple(float(c) for c in self.effective_costs))


# ---------------------------------------------------------------------------
# beliefs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Belief:
    """Posterior over hypotheses, stored as max-shifted log weights."""

    log_weights: np.ndarray

    @classmethod
    def uniform(cls, h: int) -> "Belief":
        return cls(np.zeros(h))

    @property
    def posterior(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def argmax(self) -> int:
        return int(np.argmax(self.log_weights))


def update_belief(belief: Belief, model: ObservationModel, a: int, y) -> Belief:
    """Bayes update with sample ``y`` of action ``a``; an abstain leaves it unchanged.

    Costs carry no information about the hypothesis, so an aborted action is
    not evidence of anything.
    """
    if y is ABSTAIN:
        return belief
    d = y - model.means[:, a]
    lw = belief.log_weights - 0.5 * d * d
    return Belief(lw - lw.max())


def chernoff_stop(belief: Belief, delta: float) -> int | None:
    post = belief.posterior
    i = int(np.argmax(post))
    return i if post[i] > 1.0 - delta else None


# ---------------------------------------------------------------------------
# stochastic action weights
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _cached_game(rows_bytes: bytes, shape: tuple[int, int], costs: tuple[float, ...], tol: float):
    rows = np.frombuffer(rows_bytes, dtype=float).reshape(shape)
    lam, value = solve_ratio_game(RatioGame(rows, np.asarray(costs), tol))
    lam.setflags(write=False)
    return lam, value


def _ratio_game(rows: np.ndarray, costs, tol: float):
    rows = np.ascontiguousarray(rows, dtype=float)
    return _cached_game(rows.tobytes(), rows.shape, tuple(float(c) for c in costs), float(tol))


def chernoff_game(model: ObservationModel, believed: int, effective_costs, tol: float = 1e-6):
    """Weights and optimal value of the per-cost divergence game for ``believed``.

    Gain rows are ``d_j[a] = D(f_believed^a || f_j^a)`` for ``j != believed``;
    rows that vanish on every action are dropped (they cannot be separated and
    would pin the value to zero).
    """
    k = model.kld_tensor()[believed]
    rows = np.delete(k, believed, axis=0)
    rows = rows[np.any(rows > 0.0, axis=1)]
    if rows.shape[0] == 0:
        raise DegenerateWeightsError(f"hypothesis {believed} is indistinguishable from every other one")
    return _ratio_game(rows, effective_costs, tol)


def chernoff_action_weights(model: ObservationModel, believed: int, effective_costs, tol: float = 1e-6) -> np.ndarray:
    return chernoff_game(model, believed, effective_costs, tol)[0]


def exploration_weights(model: ObservationModel, effective_costs, tol: float = 1e-6) -> np.ndarray:
    """One gain row per ordered hypothesis pair: worst-case separation per cost."""
    k = model.kld_tensor()
    h = model.n_hypotheses
    rows = np.array([k[i, j] for i in range(h) for j in range(h) if i != j])
    rows = rows[np.any(rows > 0.0, axis=1)]
    if rows.shape[0] == 0:
        raise DegenerateWeightsError("no hypothesis pair is separable")
    return _ratio_game(rows, effective_costs, tol)[0]


def nj1_action_weights(model: ObservationModel, belief: Belief, effective_costs, rho_tilde: float, tol: float = 1e-6) -> np.ndarray:
    post = belief.posterior
    if post.max() <= rho_tilde:
        return exploration_weights(model, effective_costs, tol)
    return chernoff_action_weights(model, int(np.argmax(post)), effective_costs, tol)


def weight_table(model: ObservationModel, effective_costs, tol: float = 1e-6) -> np.ndarray:
    """Rows ``0..H-1``: Chernoff weights per believed hypothesis; row ``H``: exploration.

    A believed hypothesis that nothing separates falls back to uniform weights.
    """
    h, n = model.n_hypotheses, model.n_actions
    table = np.empty((h + 1, n))
    for i in range(h):
        try:
            table[i] = chernoff_action_weights(model, i, effective_costs, tol)
        except DegenerateWeightsError:
            table[i] = 1.0 / n
    try:
        table[h] = exploration_weights(model, effective_costs, tol)
    except DegenerateWeightsError:
        table[h] = 1.0 / n
    return table


# ---------------------------------------------------------------------------
# Phi-Delta
# ---------------------------------------------------------------------------

def stage_threshold(h: int, delta: float) -> float:
    """``log((H-1)/delta)``: a union bound over at most H-1 wrong eliminations."""
    return math.log((h - 1) / delta)


def phidelta_stage_action(model: ObservationModel, alive, effective_costs) -> int:
    """Action maximising the smallest ``kld/kappa`` over the alive pairs it separates."""
    alive = sorted(alive)
    if len(alive) < 2:
        raise ValueError("a stage needs at least two alive hypotheses")
    k = model.kld_tensor()
    costs = np.asarray(effective_costs, dtype=float)
    best_a, best = -1, -math.inf
    for a in range(model.n_actions):
        worst = math.inf
        for x, i in enumerate(alive):
            for j in alive[x + 1:]:
                if k[i, j, a] > 0.0:
                    worst = min(worst, k[i, j, a] / costs[a])
        if worst < math.inf and worst > best:
            best_a, best = a, worst
    if best_a < 0:
        raise NoSeparatingActionError(f"no action separates any pair among {alive}")
    return best_a


@dataclass
class PhiDeltaState:
    alive: set[int]
    pairwise_llr: np.ndarray
    stage_action: int
    stage_threshold: float
    effective_costs: tuple[float, ...] = field(default=())

    @classmethod
    def start(cls, model: ObservationModel, delta: float, effective_costs) -> "PhiDeltaState":
        h = model.n_hypotheses
        alive = set(range(h))
        return cls(
            alive=alive,
            pairwise_llr=np.zeros((h, h)),
            stage_action=phidelta_stage_action(model, alive, effective_costs),
            stage_threshold=stage_threshold(h, delta),
            effective_costs=tuple(float(c) for c in effective_costs),
        )

    @property
    def finished(self) -> bool:
        return len(self.alive) == 1

    def winner(self) -> int | None:
        return next(iter(self.alive)) if self.finished else None


def phidelta_update_and_prune(state: PhiDeltaState, model: ObservationModel, a: int, y) -> PhiDeltaState:
    """Accumulate LLRs of sample ``y`` and prune once a stage winner exists.

    Only pairs separated by ``a`` move. A hypothesis wins when its LLR against
    every alive rival it is separated from under the stage action reaches the
    threshold; it discards exactly those rivals. Accumulators of surviving
    pairs carry over into the next stage.
    """
    if y is ABSTAIN:
        return state
    mu = model.means[:, a]
    k = model.kld_tensor()[:, :, a]
    s = state.pairwise_llr.copy()
    alive = sorted(state.alive)
    for x, i in enumerate(alive):
        for j in alive[x + 1:]:
            if k[i, j] > 0.0:
                inc = (mu[i] - mu[j]) * y - 0.5 * (mu[i] * mu[i] - mu[j] * mu[j])
                s[i, j] += inc
                s[j, i] -= inc
    alive_set = set(alive)
    pruned = False
    changed = True
    while changed and len(alive_set) > 1:
        changed = False
        for i in sorted(alive_set):
            rivals = [j for j in sorted(alive_set) if j != i and k[i, j] > 0.0]
            if rivals and all(s[i, j] >= state.stage_threshold for j in rivals):
                alive_set.difference_update(rivals)
                pruned = changed = True
                break
    stage_action = state.stage_action
    if pruned and len(alive_set) > 1:
        stage_action = phidelta_stage_action(model, alive_set, state.effective_costs)
    return PhiDeltaState(alive_set, s, stage_action, state.stage_threshold, state.effective_costs)
