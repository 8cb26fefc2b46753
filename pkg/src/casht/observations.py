"""Unit-variance Gaussian observation models.

``means[i, a]`` is the mean of a sample taken with action ``a`` when
hypothesis ``i`` is true. Everything (densities, LLRs, divergences) follows
from that matrix.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class ObservationModel:
    means: np.ndarray

    def __post_init__(self):
        m = np.array(self.means, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"means must be a 2-D hypotheses x actions matrix, got shape {m.shape}")
        if m.shape[0] < 2:
            raise ValueError("need at least two hypotheses")
        if m.shape[1] < 1:
            raise ValueError("need at least one action")
        if not np.all(np.isfinite(m)):
            raise ValueError("means must be finite (found NaN or inf)")
        m.setflags(write=False)
        object.__setattr__(self, "means", m)

    @property
    def n_hypotheses(self) -> int:
        return self.means.shape[0]

    @property
    def n_actions(self) -> int:
        return self.means.shape[1]

    def __eq__(self, other):
        return isinstance(other, ObservationModel) and np.array_equal(self.means, other.means)

    def __hash__(self):
        return hash(self.means.tobytes())

    def kld_tensor(self) -> np.ndarray:
        """``K[i, j, a] = (mu_i^a - mu_j^a)^2 / 2``."""
        d = self.means[:, None, :] - self.means[None, :, :]
        return 0.5 * d * d

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.means:
            w.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ObservationModel":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        return cls(np.array([[float(v) for v in r] for r in rows]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path) -> "ObservationModel":
        return cls.from_csv(Path(path).read_text())


def make_gaussian_model(means) -> ObservationModel:
    return ObservationModel(np.asarray(means, dtype=float))


def _check(model: ObservationModel, *hyp: int, action: int | None = None):
    for i in hyp:
        if not 0 <= i < model.n_hypotheses:
            raise IndexError(f"hypothesis {i} out of range [0, {model.n_hypotheses})")
    if action is not None and not 0 <= action < model.n_actions:
        raise IndexError(f"action {action} out of range [0, {model.n_actions})")


def log_density(model: ObservationModel, i: int, a: int, x: float) -> float:
    _check(model, i, action=a)
    d = x - model.means[i, a]
    return -0.5 * d * d - _HALF_LOG_2PI


def llr(model: ObservationModel, i: int, j: int, a: int, x: float) -> float:
    _check(model, i, j, action=a)
    mi, mj = model.means[i, a], model.means[j, a]
    return (mi - mj) * x - 0.5 * (mi * mi - mj * mj)


def kld(model: ObservationModel, i: int, j: int, a: int) -> float:
    _check(model, i, j, action=a)
    d = model.means[i, a] - model.means[j, a]
    return 0.5 * d * d


@dataclass(frozen=True)
class AssumptionReport:
    separation_ok: bool
    validity_ok: bool
    llr_second_moment_bound: float
    zero_kld_pairs: list[tuple[int, int, int]] = field(default_factory=list)
    indistinguishable_pairs: list[tuple[int, int]] = field(default_factory=list)
    useless_actions: list[int] = field(default_factory=list)


def validate_assumptions(model: ObservationModel) -> AssumptionReport:
    """Check separation, validity and the LLR second-moment bound.

    For unit-variance Gaussians with mean gap ``D`` the LLR under ``f_i`` is
    normal with mean ``D^2/2`` and variance ``D^2``, so its second moment is
    ``D^2 (1 + D^2/4)``; the bound is the maximum over all pairs and actions.
    """
    k = model.kld_tensor()
    h, n_act = model.n_hypotheses, model.n_actions
    # Gaussian divergences are exactly 0 (equal means) or strictly positive
    separation_ok = bool(np.all((k == 0.0) | (k > 0.0)))
    zero_pairs = [(i, j, a) for i in range(h) for j in range(i + 1, h) for a in range(n_act) if k[i, j, a] == 0.0]
    blind = [(i, j) for i in range(h) for j in range(i + 1, h) if not np.any(k[i, j] > 0.0)]
    useless = [a for a in range(n_act) if not np.any(k[:, :, a] > 0.0)]
    d2 = 2.0 * k
    bound = float(np.max(d2 * (1.0 + d2 / 4.0)))
    return AssumptionReport(
        separation_ok=separation_ok,
        validity_ok=not blind and not useless,
        llr_second_moment_bound=bound,
        zero_kld_pairs=zero_pairs,
        indistinguishable_pairs=blind,
        useless_actions=useless,
    )


def generate_benchmark_instance(h: int, n_actions: int, rng: np.random.Generator) -> ObservationModel:
    """Random two-level instance with one hard pair.

    Each cell's mean is 2 or 8 with equal odds, jittered once by
    ``Unif[-0.1, 0.1]``. Hypothesis 0 then copies hypothesis ``h-1`` on every
    action but the last, where it is mirrored to ``10 - mu[h-1]``, so that
    pair is separable through the last action only.
    """
    if h < 2 or n_actions < 1:
        raise ValueError("need h >= 2 and n_actions >= 1")
    base = np.where(rng.random((h, n_actions)) < 0.5, 2.0, 8.0)
    means = base + rng.uniform(-0.1, 0.1, size=(h, n_actions))
    means[0, :-1] = means[h - 1, :-1]
    means[0, -1] = 10.0 - means[h - 1, -1]
    return ObservationModel(means)
