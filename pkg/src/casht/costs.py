"""Parametric positive cost distributions and their deadline calculus.

Every family exposes the same surface: ``cdf``, ``sf``, ``mean``,
``truncated_mean`` (``E[min(C, T)]``), ``overshoot`` (``E[C - T | C > T]``),
``kappa`` (the effective per-sample cost ``E[min(C, T)] / F(T)``), ``median``
and two samplers. ``T = inf`` means "no deadline" throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy import special

from .numerics import RootProblem, find_root_bracketed, incomplete_beta

# smallest positive value numpy's random() can return; keeps log() finite
_U_FLOOR = 2.0 ** -53


class ZeroMassError(ValueError):
    """``F(T) = 0``: the deadline would abort every attempt."""


class AllCensoredError(ArithmeticError):
    """No Monte Carlo draw fell below the deadline."""


def _u(stream) -> float:
    u = stream.random()
    return u if u > 0.0 else _U_FLOOR


class CostModel:
    family: ClassVar[str]
    code: ClassVar[int]
    convex_kappa: ClassVar[bool] = False

    # -- to be provided by subclasses ------------------------------------
    def cdf(self, t: float) -> float:
        raise NotImplementedError

    def sf(self, t: float) -> float:
        return 1.0 - self.cdf(t)

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def truncated_mean(self, t: float) -> float:
        raise NotImplementedError

    def overshoot(self, t: float) -> float:
        raise NotImplementedError

    @property
    def median(self) -> float:
        raise NotImplementedError

    def sample(self, stream) -> float:
        raise NotImplementedError

    def sample_many(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def params(self) -> tuple[float, ...]:
        raise NotImplementedError

    # -- shared ------------------------------------------------------------
    @property
    def mean_is_finite(self) -> bool:
        return math.isfinite(self.mean)

    def kappa(self, t: float) -> float:
        if math.isinf(t):
            return self.mean
        f = self.cdf(t)
        if f <= 0.0:
            raise ZeroMassError(f"{self}: F({t}) = 0, no attempt can finish before the deadline")
        return self.truncated_mean(t) / f

    def kernel_params(self) -> tuple[float, float, float]:
        p = tuple(float(x) for x in self.params) + (0.0, 0.0, 0.0)
        return p[:3]

    def label(self) -> str:
        return f"{self.family}({', '.join(format(p, '.17g') for p in self.params)})"

    def __str__(self) -> str:
        return self.label()


def _check_positive(**kw):
    for name, v in kw.items():
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class Exponential(CostModel):
    rate: float
    family: ClassVar[str] = "exponential"
    code: ClassVar[int] = 0

    def __post_init__(self):
        _check_positive(rate=self.rate)

    @property
    def params(self):
        return (self.rate,)

    def cdf(self, t):
        return 0.0 if t <= 0 else -math.expm1(-self.rate * t)

    def sf(self, t):
        return 1.0 if t <= 0 else math.exp(-self.rate * t)

    @property
    def mean(self):
        return 1.0 / self.rate

    def truncated_mean(self, t):
        if math.isinf(t):
            return self.mean
        return -math.expm1(-self.rate * t) / self.rate

    def overshoot(self, t):
        return 1.0 / self.rate

    @property
    def median(self):
        return math.log(2.0) / self.rate

    def sample(self, stream):
        return -math.log1p(-_u(stream)) / self.rate

    def sample_many(self, n, rng):
        return rng.exponential(1.0 / self.rate, size=n)


@dataclass(frozen=True)
class Erlang(CostModel):
    k: int
    rate: float
    family: ClassVar[str] = "erlang"
    code: ClassVar[int] = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"Erlang shape k must be an integer >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        _check_positive(rate=self.rate)

    @property
    def params(self):
        return (self.k, self.rate)

    def cdf(self, t):
        return 0.0 if t <= 0 else float(special.gammainc(self.k, self.rate * t))

    def sf(self, t):
        return 1.0 if t <= 0 else float(special.gammaincc(self.k, self.rate * t))

    @property
    def mean(self):
        return self.k / self.rate

    def truncated_mean(self, t):
        if math.isinf(t):
            return self.mean
        x = self.rate * t
        # E[C 1{C<=T}] = (k/rate) P(k+1, x); the rest of the mass contributes T
        return self.mean * float(special.gammainc(self.k + 1, x)) + t * float(special.gammaincc(self.k, x))

    def overshoot(self, t):
        if t <= 0:
            return self.mean - t
        x = self.rate * t
        logs = [n * math.log(x) - math.lgamma(n + 1) for n in range(self.k)]
        top = max(logs)
        terms = [math.exp(v - top) for v in logs]
        num = x * math.fsum(terms[:-1])
        den = math.fsum(terms)
        return self.mean - num / (self.rate * den)

    @property
    def median(self):
        hi = self.mean
        while self.cdf(hi) < 0.5:
            hi *= 2.0
        return find_root_bracketed(RootProblem(lambda t: self.cdf(t) - 0.5, 0.0, hi, 1e-13 * hi))

    def sample(self, stream):
        acc = 0.0
        for _ in range(self.k):
            acc += -math.log1p(-_u(stream))
        return acc / self.rate

    def sample_many(self, n, rng):
        return rng.gamma(self.k, 1.0 / self.rate, size=n)


@dataclass(frozen=True)
class Hyperexponential(CostModel):
    """Two-phase mixture: ``Exp(rate1)`` w.p. ``p``, else ``Exp(rate2)``."""

    p: float
    rate1: float
    rate2: float
    family: ClassVar[str] = "hyperexponential"
    code: ClassVar[int] = 2

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"mixture weight p must lie in (0, 1), got {self.p}")
        _check_positive(rate1=self.rate1, rate2=self.rate2)
        if self.rate1 == self.rate2:
            raise ValueError("hyperexponential rates must differ (equal rates is plain exponential)")

    @property
    def params(self):
        return (self.p, self.rate1, self.rate2)

    def sf(self, t):
        if t <= 0:
            return 1.0
        return self.p * math.exp(-self.rate1 * t) + (1.0 - self.p) * math.exp(-self.rate2 * t)

    def cdf(self, t):
        if t <= 0:
            return 0.0
        return -(self.p * math.expm1(-self.rate1 * t) + (1.0 - self.p) * math.expm1(-self.rate2 * t))

    @property
    def mean(self):
        return self.p / self.rate1 + (1.0 - self.p) / self.rate2

    def truncated_mean(self, t):
        if math.isinf(t):
            return self.mean
        return (-self.p * math.expm1(-self.rate1 * t) / self.rate1
                - (1.0 - self.p) * math.expm1(-self.rate2 * t) / self.rate2)

    def tail_weight(self, t: float) -> float:
        """Posterior probability of the first phase given ``C > t``."""
        z = math.log((1.0 - self.p) / self.p) + (self.rate1 - self.rate2) * t
        if z > 700.0:
            return 0.0
        return 1.0 / (1.0 + math.exp(z))

    def overshoot(self, t):
        eta = self.tail_weight(max(t, 0.0))
        over = eta / self.rate1 + (1.0 - eta) / self.rate2
        return over if t >= 0 else over - t

    @property
    def median(self):
        hi = self.mean
        while self.cdf(hi) < 0.5:
            hi *= 2.0
        return find_root_bracketed(RootProblem(lambda t: self.cdf(t) - 0.5, 0.0, hi, 1e-13 * hi))

    def sample(self, stream):
        rate = self.rate1 if stream.random() < self.p else self.rate2
        return -math.log1p(-_u(stream)) / rate

    def sample_many(self, n, rng):
        first = rng.random(n) < self.p
        scale = np.where(first, 1.0 / self.rate1, 1.0 / self.rate2)
        return rng.exponential(1.0, size=n) * scale


@dataclass(frozen=True)
class Pareto(CostModel):
    x_min: float
    alpha: float
    family: ClassVar[str] = "pareto"
    code: ClassVar[int] = 3
    convex_kappa: ClassVar[bool] = True

    def __post_init__(self):
        _check_positive(x_min=self.x_min, alpha=self.alpha)

    @property
    def params(self):
        return (self.x_min, self.alpha)

    def sf(self, t):
        return 1.0 if t <= self.x_min else (self.x_min / t) ** self.alpha

    def cdf(self, t):
        if t <= self.x_min:
            return 0.0
        return -math.expm1(self.alpha * math.log(self.x_min / t))

    @property
    def mean(self):
        if self.alpha <= 1.0:
            return math.inf
        return self.alpha * self.x_min / (self.alpha - 1.0)

    def truncated_mean(self, t):
        if math.isinf(t):
            return self.mean
        if t <= self.x_min:
            return t
        tau = t / self.x_min
        if self.alpha == 1.0:
            return self.x_min * (1.0 + math.log(tau))
        return self.x_min * (self.alpha - tau ** (1.0 - self.alpha)) / (self.alpha - 1.0)

    def overshoot(self, t):
        if self.alpha <= 1.0:
            return math.inf
        if t <= self.x_min:
            return self.mean - t
        # C | C > T is Pareto(T, alpha)
        return t / (self.alpha - 1.0)

    def kappa(self, t):
        if math.isinf(t):
            return self.mean
        if t <= self.x_min:
            raise ZeroMassError(f"{self}: deadline {t} <= x_min, no attempt can finish")
        tau = t / self.x_min
        ta = tau ** self.alpha
        if self.alpha == 1.0:
            return self.x_min * (1.0 + math.log(tau)) * tau / (tau - 1.0)
        return self.x_min / (self.alpha - 1.0) * (self.alpha * ta - tau) / (ta - 1.0)

    @property
    def median(self):
        return self.x_min * 2.0 ** (1.0 / self.alpha)

    def sample(self, stream):
        return self.x_min * math.exp(-math.log1p(-_u(stream)) / self.alpha)

    def sample_many(self, n, rng):
        u = rng.random(n)
        return self.x_min * np.exp(-np.log1p(-u) / self.alpha)


@dataclass(frozen=True)
class LogLogistic(CostModel):
    """Log-logistic with scale ``alpha`` (the median) and shape ``beta``."""

    alpha: float
    beta: float
    family: ClassVar[str] = "loglogistic"
    code: ClassVar[int] = 4

    def __post_init__(self):
        _check_positive(alpha=self.alpha, beta=self.beta)

    @property
    def params(self):
        return (self.alpha, self.beta)

    def _z(self, t):
        return (t / self.alpha) ** self.beta

    def cdf(self, t):
        if t <= 0:
            return 0.0
        z = self._z(t)
        return z / (1.0 + z) if math.isfinite(z) else 1.0

    def sf(self, t):
        if t <= 0:
            return 1.0
        return 1.0 / (1.0 + self._z(t))

    @property
    def mean(self):
        if self.beta <= 1.0:
            return math.inf
        x = math.pi / self.beta
        return self.alpha * x / math.sin(x)

    def truncated_mean(self, t):
        if math.isinf(t):
            return self.mean
        if t <= 0:
            return 0.0
        if self.beta > 1.0:
            b = 1.0 / self.beta
            return self.alpha * b * incomplete_beta(self.cdf(t), b, 1.0 - b)
        # b <= 0 here, so integrate 1/(1+z^beta) through the hypergeometric form
        x = t / self.alpha
        return self.alpha * x * float(special.hyp2f1(1.0, 1.0 / self.beta, 1.0 + 1.0 / self.beta, -x ** self.beta))

    def overshoot(self, t):
        if self.beta <= 1.0:
            return math.inf
        if t <= 0:
            return self.mean - t
        b = 1.0 / self.beta
        s = self.sf(t)
        tail = self.alpha * b * incomplete_beta(s, 1.0 - b, b)
        return tail / s

    @property
    def median(self):
        return self.alpha

    def sample(self, stream):
        u = _u(stream)
        return self.alpha * math.exp((math.log(u) - math.log1p(-u)) / self.beta)

    def sample_many(self, n, rng):
        u = rng.random(n)
        u[u == 0.0] = _U_FLOOR
        return self.alpha * np.exp((np.log(u) - np.log1p(-u)) / self.beta)


FAMILIES: dict[str, type[CostModel]] = {
    cls.family: cls for cls in (Exponential, Erlang, Hyperexponential, Pareto, LogLogistic)
}
FAMILY_BY_CODE = {cls.code: cls for cls in FAMILIES.values()}


def make_cost_model(family: str, *params: float) -> CostModel:
    """Build a validated cost model, e.g. ``make_cost_model("pareto", 1, 1.5)``."""
    try:
        cls = FAMILIES[family.lower()]
    except KeyError:
        raise ValueError(f"unknown cost family {family!r}; choose from {sorted(FAMILIES)}") from None
    return cls(*params)


def kappa(model: CostModel, t: float) -> float:
    return model.kappa(t)


@dataclass(frozen=True)
class KappaEstimate:
    estimate: float
    stderr: float
    samples: int


def kappa_mc_oracle(model: CostModel, t: float, n: int, rng: np.random.Generator) -> KappaEstimate:
    """Ratio estimator ``mean(min(C, T)) / mean(1{C <= T})`` with delta-method error."""
    if n < 1000:
        raise ValueError("kappa_mc_oracle needs n >= 1000")
    if model.cdf(t) <= 0.0:
        raise ZeroMassError(f"{model}: F({t}) = 0")
    c = model.sample_many(n, rng)
    clipped = np.minimum(c, t)
    hit = (c <= t).astype(float)
    p = hit.mean()
    if p == 0.0:
        raise AllCensoredError(f"{model}: none of {n} draws finished before T={t}")
    r = clipped.mean() / p
    resid = clipped - r * hit
    stderr = math.sqrt(resid.var() / n) / p
    return KappaEstimate(float(r), float(stderr), n)
