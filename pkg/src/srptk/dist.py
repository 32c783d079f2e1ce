"""Service-requirement distributions.

Every variant exposes the partial-moment functionals used by the load and
bound formulas (``partial_mean``, ``partial_m2``, ``trunc_mean``) in closed
form, plus vectorised seeded sampling.  All objects are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "ServiceDist",
    "Uniform",
    "Exponential",
    "Hyperexp2",
    "Pareto",
    "BoundedPareto",
    "Deterministic",
    "Moments",
    "moments",
    "hyperexp_from_mean_scv",
    "make_stream",
    "sample",
    "from_literal",
]


def make_stream(seed: int) -> np.random.Generator:
    """Return a PCG64 generator seeded explicitly."""
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    return np.random.Generator(np.random.PCG64(int(seed)))


def _check_x(x: float) -> float:
    x = float(x)
    if math.isnan(x) or x < 0:
        raise ValueError(f"size threshold must be >= 0, got {x!r}")
    return x


_TINY = np.nextafter(0.0, 1.0)


class ServiceDist:
    """Base class; subclasses are frozen dataclasses."""

    kind: str = ""

    # density/moment surface ------------------------------------------------
    def pdf(self, x: float) -> float:
        raise NotImplementedError

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def partial_mean(self, x: float) -> float:
        """E[S 1(S <= x)]."""
        raise NotImplementedError

    def partial_m2(self, x: float) -> float:
        """E[S^2 1(S <= x)]."""
        raise NotImplementedError

    def trunc_mean(self, x: float) -> float:
        """E[min(S, x)], computed as the integral of the tail over [0, x]."""
        raise NotImplementedError

    def trunc_m2(self, x: float) -> float:
        """E[min(S, x)^2]."""
        x = _check_x(x)
        if math.isinf(x):
            return self.second_moment()
        return self.partial_m2(x) + x * x * self.sf(x)

    def sf(self, x: float) -> float:
        return 1.0 - self.cdf(x)

    def second_moment(self) -> float:
        return self.partial_m2(math.inf)

    def scv(self) -> float:
        m = self.mean()
        return self.second_moment() / (m * m) - 1.0

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def atoms(self) -> tuple[tuple[float, float], ...]:
        """Point masses as (location, probability)."""
        return ()

    def breakpoints(self) -> tuple[float, ...]:
        """Finite points where the density is not smooth (support ends, atoms)."""
        lo, hi = self.support()
        pts = {lo}
        if math.isfinite(hi):
            pts.add(hi)
        pts.update(a for a, _ in self.atoms())
        return tuple(sorted(p for p in pts if p > 0))

    def quantile(self, p: float) -> float:
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        lo, hi = self.support()
        if p == 0.0:
            return lo
        if p == 1.0:
            return hi
        if math.isinf(hi):
            hi = max(1.0, lo) * 2.0
            while self.cdf(hi) < p:
                hi *= 2.0
        return brentq(lambda t: self.cdf(t) - p, lo, hi, xtol=1e-14, rtol=1e-14)

    # sampling --------------------------------------------------------------
    def sample_n(self, stream: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def to_literal(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(ServiceDist):
    a: float
    b: float
    kind = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("Uniform bounds must be finite")
        if self.a < 0 or not self.a < self.b:
            raise ValueError(f"Uniform requires 0 <= a < b, got a={self.a}, b={self.b}")

    def pdf(self, x):
        return 1.0 / (self.b - self.a) if self.a <= x <= self.b else 0.0

    def cdf(self, x):
        if x <= self.a:
            return 0.0
        if x >= self.b:
            return 1.0
        return (x - self.a) / (self.b - self.a)

    def mean(self):
        return 0.5 * (self.a + self.b)

    def _clip(self, x):
        return min(max(x, self.a), self.b)

    def partial_mean(self, x):
        m = self._clip(_check_x(x))
        return (m * m - self.a * self.a) / (2.0 * (self.b - self.a))

    def partial_m2(self, x):
        m = self._clip(_check_x(x))
        return (m**3 - self.a**3) / (3.0 * (self.b - self.a))

    def trunc_mean(self, x):
        x = _check_x(x)
        if x <= self.a:
            return x
        m = min(x, self.b)
        w = self.b - self.a
        return self.a + (self.b * (m - self.a) - 0.5 * (m * m - self.a * self.a)) / w

    def support(self):
        return (self.a, self.b)

    def sample_n(self, stream, n):
        # b - w*u with u in [0, 1) lands in (a, b], so draws stay > 0
        return self.b - (self.b - self.a) * stream.random(n)

    def to_literal(self):
        return {"kind": "uniform", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Exponential(ServiceDist):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError("Exponential rate must be positive and finite")

    def pdf(self, x):
        return self.rate * math.exp(-self.rate * x) if x >= 0 else 0.0

    def cdf(self, x):
        return -math.expm1(-self.rate * x) if x > 0 else 0.0

    def sf(self, x):
        return math.exp(-self.rate * x) if x > 0 else 1.0

    def mean(self):
        return 1.0 / self.rate

    def partial_mean(self, x):
        x = _check_x(x)
        if math.isinf(x):
            return self.mean()
        y = self.rate * x
        return (-math.expm1(-y) - y * math.exp(-y)) / self.rate

    def partial_m2(self, x):
        x = _check_x(x)
        if math.isinf(x):
            return 2.0 / self.rate**2
        y = self.rate * x
        return (2.0 - math.exp(-y) * (y * y + 2.0 * y + 2.0)) / self.rate**2

    def trunc_mean(self, x):
        x = _check_x(x)
        if math.isinf(x):
            return self.mean()
        return -math.expm1(-self.rate * x) / self.rate

    def support(self):
        return (0.0, math.inf)

    def quantile(self, p):
        if p >= 1.0:
            return math.inf
        return -math.log1p(-p) / self.rate

    def sample_n(self, stream, n):
        return np.maximum(stream.standard_exponential(n) / self.rate, _TINY)

    def to_literal(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Hyperexp2(ServiceDist):
    """Two-phase hyperexponential: rate1 w.p. p1, rate2 otherwise."""

    p1: float
    rate1: float
    rate2: float
    kind = "hyperexp2"

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError("p1 must lie in [0, 1]")
        for r in (self.rate1, self.rate2):
            if not (r > 0 and math.isfinite(r)):
                raise ValueError("hyperexponential rates must be positive and finite")

    @property
    def _phases(self):
        return ((self.p1, Exponential(self.rate1)), (1.0 - self.p1, Exponential(self.rate2)))

    def _mix(self, name, x):
        return sum(p * getattr(e, name)(x) for p, e in self._phases)

    def pdf(self, x):
        return self._mix("pdf", x)

    def cdf(self, x):
        return self._mix("cdf", x)

    def sf(self, x):
        return self._mix("sf", x)

    def mean(self):
        return self.p1 / self.rate1 + (1.0 - self.p1) / self.rate2

    def partial_mean(self, x):
        return self._mix("partial_mean", x)

    def partial_m2(self, x):
        return self._mix("partial_m2", x)

    def trunc_mean(self, x):
        return self._mix("trunc_mean", x)

    def support(self):
        return (0.0, math.inf)

    def sample_n(self, stream, n):
        u = stream.random(n)
        e = stream.standard_exponential(n)
        rates = np.where(u < self.p1, self.rate1, self.rate2)
        return np.maximum(e / rates, _TINY)

    def to_literal(self):
        return {"kind": "hyperexp2", "p1": self.p1, "rate1": self.rate1, "rate2": self.rate2}


@dataclass(frozen=True)
class Pareto(ServiceDist):
    """Pareto tail (xm/x)^alpha on [xm, inf).

    Only alpha > 2 is admitted by default: the heavy-traffic results need a
    tail lighter than Pareto-2.  ``allow_heavy_tail=True`` lifts this to any
    alpha > 1 (finite mean) for exploratory runs.
    """

    xm: float
    alpha: float
    allow_heavy_tail: bool = False
    kind = "pareto"

    def __post_init__(self):
        if not (self.xm > 0 and math.isfinite(self.xm)):
            raise ValueError("Pareto scale xm must be positive")
        if not self.alpha > 1:
            raise ValueError("Pareto needs alpha > 1 for a finite mean")
        if self.alpha <= 2 and not self.allow_heavy_tail:
            raise ValueError(
                "Pareto with alpha <= 2 is outside the heavy-traffic hypotheses; "
                "pass allow_heavy_tail=True to run it anyway"
            )

    def pdf(self, x):
        if x < self.xm:
            return 0.0
        return self.alpha * self.xm**self.alpha / x ** (self.alpha + 1.0)

    def cdf(self, x):
        return 0.0 if x <= self.xm else 1.0 - (self.xm / x) ** self.alpha

    def sf(self, x):
        return 1.0 if x <= self.xm else (self.xm / x) ** self.alpha

    def mean(self):
        return self.alpha * self.xm / (self.alpha - 1.0)

    def partial_mean(self, x):
        x = _check_x(x)
        if x <= self.xm:
            return 0.0
        r = self.xm / x
        return self.alpha * self.xm / (self.alpha - 1.0) * (1.0 - r ** (self.alpha - 1.0))

    def partial_m2(self, x):
        x = _check_x(x)
        if math.isinf(x) and self.alpha <= 2:
            return math.inf
        if x <= self.xm:
            return 0.0
        a, xm = self.alpha, self.xm
        if a == 2.0:
            return 2.0 * xm * xm * math.log(x / xm)
        return a * xm * xm / (a - 2.0) * (1.0 - (xm / x) ** (a - 2.0))

    def trunc_mean(self, x):
        x = _check_x(x)
        if x <= self.xm:
            return x
        return self.xm + self.xm / (self.alpha - 1.0) * (1.0 - (self.xm / x) ** (self.alpha - 1.0))

    def support(self):
        return (self.xm, math.inf)

    def quantile(self, p):
        if p >= 1.0:
            return math.inf
        return self.xm * (1.0 - p) ** (-1.0 / self.alpha)

    def sample_n(self, stream, n):
        return self.xm * (1.0 - stream.random(n)) ** (-1.0 / self.alpha)

    def to_literal(self):
        lit = {"kind": "pareto", "xm": self.xm, "alpha": self.alpha}
        if self.allow_heavy_tail:
            lit["allow_heavy_tail"] = True
        return lit


@dataclass(frozen=True)
class BoundedPareto(ServiceDist):
    L: float
    U: float
    alpha: float
    kind = "bounded_pareto"

    def __post_init__(self):
        if not (0 < self.L < self.U and math.isfinite(self.U)):
            raise ValueError("BoundedPareto requires 0 < L < U < inf")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("BoundedPareto alpha must be positive")

    @property
    def _norm(self):
        return 1.0 / (1.0 - (self.L / self.U) ** self.alpha)

    def _clip(self, x):
        return min(max(x, self.L), self.U)

    def pdf(self, x):
        if not self.L <= x <= self.U:
            return 0.0
        return self._norm * self.alpha * self.L**self.alpha / x ** (self.alpha + 1.0)

    def cdf(self, x):
        if x <= self.L:
            return 0.0
        if x >= self.U:
            return 1.0
        return self._norm * (1.0 - (self.L / x) ** self.alpha)

    def _power_integral(self, x, p):
        # integral of t^(p-1-alpha) * alpha * L^alpha over [L, x]
        a, L = self.alpha, self.L
        e = p - a
        if e == 0.0:
            return a * L**a * math.log(x / L)
        return a * L**a * (x**e - L**e) / e

    def mean(self):
        return self.partial_mean(self.U)

    def partial_mean(self, x):
        m = self._clip(_check_x(x))
        return self._norm * self._power_integral(m, 1.0)

    def partial_m2(self, x):
        m = self._clip(_check_x(x))
        return self._norm * self._power_integral(m, 2.0)

    def trunc_mean(self, x):
        x = _check_x(x)
        if x <= self.L:
            return x
        m = min(x, self.U)
        a, L = self.alpha, self.L
        if a == 1.0:
            head = L * math.log(m / L)
        else:
            head = L**a * (m ** (1.0 - a) - L ** (1.0 - a)) / (1.0 - a)
        return L + self._norm * (head - (L / self.U) ** a * (m - L))

    def support(self):
        return (self.L, self.U)

    def sample_n(self, stream, n):
        u = stream.random(n)
        c = 1.0 - (self.L / self.U) ** self.alpha
        return self.L * (1.0 - u * c) ** (-1.0 / self.alpha)

    def to_literal(self):
        return {"kind": "bounded_pareto", "L": self.L, "U": self.U, "alpha": self.alpha}


@dataclass(frozen=True)
class Deterministic(ServiceDist):
    c: float
    kind = "deterministic"

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("Deterministic size must be positive")

    def pdf(self, x):
        return 0.0

    def cdf(self, x):
        return 1.0 if x >= self.c else 0.0

    def mean(self):
        return self.c

    # the atom counts as "at most x" once x reaches c
    def partial_mean(self, x):
        return self.c if _check_x(x) >= self.c else 0.0

    def partial_m2(self, x):
        return self.c * self.c if _check_x(x) >= self.c else 0.0

    def trunc_mean(self, x):
        return min(_check_x(x), self.c)

    def support(self):
        return (self.c, self.c)

    def atoms(self):
        return ((self.c, 1.0),)

    def quantile(self, p):
        return self.c

    def sample_n(self, stream, n):
        return np.full(n, self.c)

    def to_literal(self):
        return {"kind": "deterministic", "c": self.c}


class Moments(NamedTuple):
    pdf: float
    cdf: float
    mean: float
    partial_mean: float
    partial_m2: float
    trunc_mean: float


def moments(d: ServiceDist, x: float) -> Moments:
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"x must be finite and >= 0, got {x!r}")
    return Moments(
        pdf=d.pdf(x),
        cdf=d.cdf(x),
        mean=d.mean(),
        partial_mean=d.partial_mean(x),
        partial_m2=d.partial_m2(x),
        trunc_mean=d.trunc_mean(x),
    )


def hyperexp_from_mean_scv(mean: float, scv: float) -> Hyperexp2:
    """Balanced-means two-phase hyperexponential with the given mean and C^2.

    Each phase carries half of the expected work: p1/rate1 = p2/rate2.
    """
    if not mean > 0:
        raise ValueError("mean must be positive")
    if not scv > 1:
        raise ValueError("balanced two-phase hyperexponential needs scv > 1")
    p1 = 0.5 * (1.0 + math.sqrt((scv - 1.0) / (scv + 1.0)))
    return Hyperexp2(p1=p1, rate1=2.0 * p1 / mean, rate2=2.0 * (1.0 - p1) / mean)


def sample(d: ServiceDist, stream: np.random.Generator) -> float:
    return float(d.sample_n(stream, 1)[0])


_KINDS = {
    "uniform": Uniform,
    "exponential": Exponential,
    "hyperexp2": Hyperexp2,
    "pareto": Pareto,
    "bounded_pareto": BoundedPareto,
    "deterministic": Deterministic,
}


def from_literal(lit: dict[str, Any] | ServiceDist) -> ServiceDist:
    """Build a distribution from a config literal such as
    ``{"kind": "hyperexp2", "mean": 1, "scv": 10}``."""
    if isinstance(lit, ServiceDist):
        return lit
    if not isinstance(lit, dict) or "kind" not in lit:
        raise ValueError(f"distribution literal needs a 'kind' field: {lit!r}")
    params = {k: v for k, v in lit.items() if k != "kind"}
    kind = lit["kind"]
    if kind not in _KINDS:
        raise ValueError(f"unknown distribution kind {kind!r}")
    if kind == "exponential" and "mean" in params:
        return Exponential(rate=1.0 / float(params.pop("mean")), **params)
    if kind == "hyperexp2" and ("mean" in params or "scv" in params):
        if set(params) != {"mean", "scv"}:
            raise ValueError("hyperexp2 literal takes either (mean, scv) or (p1, rate1, rate2)")
        return hyperexp_from_mean_scv(float(params["mean"]), float(params["scv"]))
    cls = _KINDS[kind]
    try:
        return cls(**{k: (v if isinstance(v, bool) else float(v)) for k, v in params.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None
