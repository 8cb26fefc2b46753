"""Special functions and small solvers shared by the rest of the package.

Everything here is a pure function of its inputs except :func:`rng_stream`,
which hands back a fresh single-owner generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class BracketError(ValueError):
    """Raised when a root bracket does not straddle a sign change."""


# ---------------------------------------------------------------------------
# incomplete beta
# ---------------------------------------------------------------------------

def _beta_cf(x: float, a: float, b: float, eps: float = 1e-16, max_iter: int = 10000) -> float:
    # Modified Lentz evaluation of the continued fraction for I_x(a, b).
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def complete_beta(a: float, b: float) -> float:
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def incomplete_beta(x: float, a: float, b: float) -> float:
    """Unnormalised incomplete beta ``B(x; a, b) = int_0^x u^(a-1) (1-u)^(b-1) du``.

    Evaluated as the regularised continued fraction times the complete beta,
    switching to ``B(a, b) - B(1-x; b, a)`` when ``x`` lies past the mean
    ``(a+1)/(a+b+2)`` so the fraction always converges quickly.
    """
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"incomplete_beta needs a > 0 and b > 0, got a={a}, b={b}")
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"incomplete_beta needs x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    full = complete_beta(a, b)
    if x == 1.0:
        return full
    log_front = a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(x, a, b) / a
    return full - math.exp(log_front) * _beta_cf(1.0 - x, b, a) / b


# ---------------------------------------------------------------------------
# root finding and 1-D minimisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RootProblem:
    objective: Callable[[float], float]
    lo: float
    hi: float
    tol: float = 1e-12

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BracketError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def find_root_bracketed(problem: RootProblem, max_iter: int = 400) -> float:
    """Bisection. Returns the midpoint of the final bracket (width <= tol)."""
    f = problem.objective
    lo, hi = float(problem.lo), float(problem.hi)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"objective has the same sign at {lo} ({flo}) and {hi} ({fhi})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= problem.tol or mid in (lo, hi):
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def minimize_convex_1d(
    objective: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10
) -> tuple[float, float]:
    """Golden-section search for a convex (unimodal) objective on ``[lo, hi]``.

    Both endpoints are also evaluated, so a minimum sitting on the boundary is
    reported exactly rather than approached from inside.
    """
    if not lo < hi:
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    if not tol > 0:
        raise ValueError("tol must be positive")
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = objective(d)
        if c >= d:
            break
    x = 0.5 * (a + b)
    candidates = [(objective(x), x), (objective(lo), float(lo)), (objective(hi), float(hi))]
    fx, x = min(candidates)
    return x, fx


# ---------------------------------------------------------------------------
# ratio game
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioGame:
    """max over the simplex of min_j (lam . d_j) / (lam . costs)."""

    gain_rows: np.ndarray
    costs: np.ndarray
    tol: float = 1e-6

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.gain_rows, dtype=float))
        costs = np.asarray(self.costs, dtype=float).ravel()
        if rows.shape[0] < 1 or rows.size == 0:
            raise ValueError("ratio game needs at least one gain row")
        if rows.shape[1] != costs.size:
            raise ValueError(f"gain rows have {rows.shape[1]} entries, costs have {costs.size}")
        if np.any(~np.isfinite(costs)) or np.any(costs <= 0):
            raise ValueError("costs must be finite and strictly positive")
        if np.any(rows < 0) or np.any(~np.isfinite(rows)):
            raise ValueError("gain rows must be finite and non-negative")
        object.__setattr__(self, "gain_rows", rows)
        object.__setattr__(self, "costs", costs)


def _game_value_small(payoff: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact max-min for one or two rows by enumerating candidate points.

    With two linear functions on the simplex the optimum sits on a vertex or
    on an edge point where both rows are equal.
    """
    n = payoff.shape[1]
    eye = np.eye(n)
    candidates = [eye[a] for a in range(n)]
    if payoff.shape[0] == 2:
        diff = payoff[0] - payoff[1]
        for a in range(n):
            for b in range(a + 1, n):
                if (diff[a] > 0) != (diff[b] > 0) and diff[a] != diff[b]:
                    w = diff[b] / (diff[b] - diff[a])
                    if 0.0 < w < 1.0:
                        p = np.zeros(n)
                        p[a], p[b] = w, 1.0 - w
                        candidates.append(p)
    best_p, best_v = candidates[0], -math.inf
    for p in candidates:
        v = float(np.min(payoff @ p))
        if v > best_v + 1e-15:
            best_p, best_v = p, v
    return best_p, best_v


def _game_value_lp(payoff: np.ndarray) -> tuple[np.ndarray, float]:
    m, n = payoff.shape
    # variables: lam (n), v ; maximise v s.t. payoff @ lam >= v
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-payoff, np.ones((m, 1))])
    b_ub = np.zeros(m)
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    bounds = [(0.0, None)] * n + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise ArithmeticError(f"matrix game LP failed: {res.message}")
    lam = np.clip(res.x[:n], 0.0, None)
    lam /= lam.sum()
    return lam, float(np.min(payoff @ lam))


def matrix_game_value(payoff: np.ndarray) -> tuple[np.ndarray, float]:
    """Row-mixing player's optimal strategy for ``max_lam min_j payoff[j] . lam``."""
    payoff = np.atleast_2d(np.asarray(payoff, dtype=float))
    if payoff.shape[0] <= 2:
        return _game_value_small(payoff)
    return _game_value_lp(payoff)


def solve_ratio_game(game: RatioGame) -> tuple[np.ndarray, float]:
    """Bisection on the ratio value ``t``.

    ``t`` is feasible when the matrix game with payoff ``d_j[a] - t*costs[a]``
    has a non-negative value. The returned weights certify the lower end of
    the final bracket, so ``min_j ratio_j(weights) >= value - tol``.

    If some gain row is identically zero the optimum is 0 for every weight
    vector; uniform weights and value 0 are returned in that case.
    """
    rows, costs = game.gain_rows, game.costs
    n = costs.size
    # identical rows constrain identically
    rows = np.unique(rows, axis=0)
    if np.any(np.all(rows == 0.0, axis=1)):
        return np.full(n, 1.0 / n), 0.0
    lo, hi = 0.0, float(np.max(rows / costs[None, :]))
    best_lam, _ = matrix_game_value(rows)
    while hi - lo > game.tol:
        mid = 0.5 * (lo + hi)
        lam, v = matrix_game_value(rows - mid * costs[None, :])
        if v >= 0.0:
            lo, best_lam = mid, lam
        else:
            hi = mid
    ratios = (rows @ best_lam) / float(costs @ best_lam)
    return best_lam, float(np.min(ratios))


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Reproducible substream ``stream_id`` of master ``seed``.

    PCG64 seeded through ``SeedSequence(seed, spawn_key=(stream_id,))``; the
    period is 2**128 and distinct spawn keys give statistically independent
    streams. Output is identical across platforms for equal arguments.
    """
    if seed < 0 or stream_id < 0:
        raise ValueError("seed and stream_id must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def simplex_grid(n: int, step: float) -> np.ndarray:
    """All points of the probability simplex in ``n`` dims on a lattice of ``step``."""
    k = int(round(1.0 / step))
    if n == 1:
        return np.ones((1, 1))
    pts = []

    def rec(prefix: list[int], remaining: int, dims_left: int):
        if dims_left == 1:
            pts.append(prefix + [remaining])
            return
        for i in range(remaining + 1):
            rec(prefix + [i], remaining - i, dims_left - 1)

    rec([], k, n)
    return np.asarray(pts, dtype=float) / k


def ratio_game_brute_force(gain_rows: Sequence[Sequence[float]], costs: Sequence[float], step: float = 1e-3):
    """Grid search reference for :func:`solve_ratio_game` (small ``n`` only)."""
    rows = np.atleast_2d(np.asarray(gain_rows, dtype=float))
    c = np.asarray(costs, dtype=float)
    grid = simplex_grid(c.size, step)
    vals = np.min(grid @ rows.T, axis=1) / (grid @ c)
    i = int(np.argmax(vals))
    return grid[i], float(vals[i])
