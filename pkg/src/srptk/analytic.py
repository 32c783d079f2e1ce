"""Loads, busy periods, single-server response formulas and k-server bounds.

Conventions: k servers of rate 1/k, so a size-x job alone in the system
takes k*x.  ``rho`` is lambda*E[S].  Relevant loads:

    rho_le(x)  = lambda * E[S 1(S <= x)]
    rho_bar(x) = lambda * E[min(S, x)]

Expectations of per-size quantities over S are computed as single
integrals.  Terms of the form c * int_0^x g(t) dt are folded using
E[int_0^S g] = int g(t) P(S > t) dt, which avoids nested quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .dist import ServiceDist, from_literal
from .quadrature import QuadratureError, integrate

__all__ = [
    "LoadContext",
    "BoundReport",
    "PolicyBound",
    "SRPT1Response",
    "FB1Response",
    "QuadratureError",
    "rho_le",
    "rho_bar",
    "busy_mean",
    "psjf1_wait_mean",
    "srpt1_response_mean",
    "fb1_response_mean",
    "bound_H",
    "bound_I",
    "policy_bound",
    "bound_report",
    "mean_over_sizes",
    "expected",
    "bin_mean",
    "SizeTerm",
]


@dataclass(frozen=True)
class LoadContext:
    lam: float
    dist: ServiceDist
    k: int = 1
    rho: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dist", from_literal(self.dist))
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("arrival rate must be positive and finite")
        rho = self.lam * self.dist.mean()
        if not 0.0 < rho < 1.0:
            raise ValueError(f"unstable load rho={rho}; need 0 < rho < 1")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_rho(cls, rho: float, dist, k: int = 1) -> "LoadContext":
        d = from_literal(dist)
        return cls(rho / d.mean(), d, k)

    def with_k(self, k: int) -> "LoadContext":
        return LoadContext(self.lam, self.dist, k)


class SRPT1Response(NamedTuple):
    wait: float
    residence: float

    @property
    def total(self) -> float:
        return self.wait + self.residence


class FB1Response(NamedTuple):
    wait_part: float
    residence_part: float

    @property
    def total(self) -> float:
        return self.wait_part + self.residence_part


class PolicyBound(NamedTuple):
    value: float
    partial: bool


def _x(x: float) -> float:
    x = float(x)
    if math.isnan(x) or x < 0:
        raise ValueError(f"size must be >= 0, got {x!r}")
    return x


def rho_le(ctx: LoadContext, x: float) -> float:
    return min(ctx.lam * ctx.dist.partial_mean(_x(x)), ctx.rho)


def rho_bar(ctx: LoadContext, x: float) -> float:
    return min(ctx.lam * ctx.dist.trunc_mean(_x(x)), ctx.rho)


def busy_mean(work: float, rho_rel: float) -> float:
    """Mean length of a busy period started by `work`, admitting load rho_rel."""
    if work < 0:
        raise ValueError("initial work must be >= 0")
    if not 0.0 <= rho_rel < 1.0:
        raise ValueError(f"busy period diverges for relevant load {rho_rel}")
    return work / (1.0 - rho_rel)


def psjf1_wait_mean(ctx: LoadContext, x: float) -> float:
    x = _x(x)
    r = rho_le(ctx, x)
    return ctx.lam * ctx.dist.partial_m2(x) / (2.0 * (1.0 - r) ** 2)


def _inv_free(ctx: LoadContext) -> Callable[[float], float]:
    lam, pm = ctx.lam, ctx.dist.partial_mean
    return lambda t: 1.0 / (1.0 - lam * pm(t))


def _residence(ctx: LoadContext, x: float) -> float:
    """int_0^x dt / (1 - rho_le(t))."""
    if x == 0.0:
        return 0.0
    return integrate(_inv_free(ctx), 0.0, x, ctx.dist.breakpoints()).value


def srpt1_response_mean(ctx: LoadContext, x: float) -> SRPT1Response:
    """Classical M/G/1 SRPT mean waiting and residence time of a size-x job."""
    x = _x(x)
    r = rho_le(ctx, x)
    wait = ctx.lam * ctx.dist.trunc_m2(x) / (2.0 * (1.0 - r) ** 2)
    return SRPT1Response(wait, _residence(ctx, x))


def fb1_response_mean(ctx: LoadContext, x: float) -> FB1Response:
    x = _x(x)
    r = rho_bar(ctx, x)
    wait = ctx.lam * ctx.dist.trunc_m2(x) / (2.0 * (1.0 - r) ** 2)
    return FB1Response(wait, busy_mean(x, r))


def bound_H(ctx: LoadContext, x: float) -> float:
    x = _x(x)
    return srpt1_response_mean(ctx, x).wait + busy_mean(2 * ctx.k * x, rho_le(ctx, x))


def bound_I(ctx: LoadContext, x: float) -> float:
    x = _x(x)
    r = rho_le(ctx, x)
    return (
        psjf1_wait_mean(ctx, x)
        + ctx.k * r * x / (1.0 - r)
        + ctx.k * _residence(ctx, x)
    )


def policy_bound(ctx: LoadContext, x: float, policy: str) -> PolicyBound:
    """Mean-response bound for PSJF-k, FB-k, or the RS-k busy-period increment.

    RS is partial: the caller adds a simulated RS-1 waiting time.
    """
    x = _x(x)
    p = policy.upper()
    inc = (2 * ctx.k - 1) * x
    if p == "PSJF":
        return PolicyBound(psjf1_wait_mean(ctx, x) + busy_mean(inc, rho_le(ctx, x)), False)
    if p == "FB":
        return PolicyBound(
            fb1_response_mean(ctx, x).wait_part + busy_mean(inc, rho_bar(ctx, x)), False
        )
    if p == "RS":
        return PolicyBound(busy_mean(inc, rho_le(ctx, x)), True)
    raise ValueError(f"no bound for policy {policy!r}")


@dataclass(frozen=True)
class BoundReport:
    x: float
    rho_le_x: float
    H: float
    I: float
    policy_bounds: dict

    def as_row(self) -> dict:
        return {
            "x": self.x,
            "rho_le_x": self.rho_le_x,
            "H": self.H,
            "I": self.I,
            "psjf_bound": self.policy_bounds["PSJF"],
            "fb_bound": self.policy_bounds["FB"],
            "rs_increment": self.policy_bounds["RS"],
        }


def bound_report(ctx: LoadContext, x: float) -> BoundReport:
    x = _x(x)
    return BoundReport(
        x=x,
        rho_le_x=rho_le(ctx, x),
        H=bound_H(ctx, x),
        I=bound_I(ctx, x),
        policy_bounds={p: policy_bound(ctx, x, p).value for p in ("PSJF", "FB", "RS")},
    )


# expectations over S ------------------------------------------------------


def _density_integral(ctx: LoadContext, h: Callable[[float], float], lo: float, hi: float) -> float:
    """int_(lo, hi] h(x) dF(x), including atoms."""
    d = ctx.dist
    s_lo, s_hi = d.support()
    a, b = max(lo, s_lo), min(hi, s_hi)
    total = 0.0
    if a < b:
        pdf = d.pdf
        total = integrate(lambda x: h(x) * pdf(x), a, b, d.breakpoints()).value
    for c, p in d.atoms():
        if lo < c <= hi:
            total += p * h(c)
    return total


def mean_over_sizes(ctx: LoadContext, per_x_fn: Callable[[float], float]) -> float:
    """E[per_x_fn(S)].  Raises QuadratureError when refinement fails."""
    return _density_integral(ctx, per_x_fn, 0.0, math.inf)


class SizeTerm(NamedTuple):
    """A per-size function point(x) + coef * int_0^x g(t) dt."""

    point: Callable[[float], float]
    coef: float = 0.0
    g: Callable[[float], float] | None = None

    def __call__(self, x: float) -> float:
        v = self.point(x)
        if self.coef and x > 0:
            v += self.coef * integrate(self.g, 0.0, x).value
        return v


def bin_mean(ctx: LoadContext, term: SizeTerm, lo: float = 0.0, hi: float = math.inf) -> float:
    """E[term(S) | lo < S <= hi]; with the default range, E[term(S)]."""
    d = ctx.dist
    mass = (d.cdf(hi) if math.isfinite(hi) else 1.0) - d.cdf(lo)
    if mass <= 0.0:
        raise ValueError(f"size bin ({lo}, {hi}] has zero probability")
    total = _density_integral(ctx, term.point, lo, hi)
    if term.coef:
        g = term.g
        # int_lo^hi f(x) int_0^x g = G(lo) P(lo<S<=hi) + int_lo^hi g(t) P(t<S<=hi) dt
        head = integrate(g, 0.0, lo, d.breakpoints()).value if lo > 0 else 0.0
        if math.isfinite(hi):
            Fhi = d.cdf(hi)
            body = integrate(lambda t: g(t) * (Fhi - d.cdf(t)), lo, hi, d.breakpoints()).value
        else:
            body = integrate(lambda t: g(t) * d.sf(t), lo, math.inf, d.breakpoints()).value
        total += term.coef * (head * mass + body)
    return total / mass


def _terms(ctx: LoadContext) -> dict[str, SizeTerm]:
    lam, k, d = ctx.lam, ctx.k, ctx.dist
    inv = _inv_free(ctx)

    def r_le(x):
        return min(lam * d.partial_mean(x), ctx.rho)

    def r_bar(x):
        return min(lam * d.trunc_mean(x), ctx.rho)

    def srpt_wait(x):
        return lam * d.trunc_m2(x) / (2.0 * (1.0 - r_le(x)) ** 2)

    def psjf_wait(x):
        return lam * d.partial_m2(x) / (2.0 * (1.0 - r_le(x)) ** 2)

    def fb_wait(x):
        return lam * d.trunc_m2(x) / (2.0 * (1.0 - r_bar(x)) ** 2)

    return {
        "srpt1": SizeTerm(srpt_wait, 1.0, inv),
        "psjf1_wait": SizeTerm(psjf_wait),
        "fb1": SizeTerm(lambda x: fb_wait(x) + x / (1.0 - r_bar(x))),
        "H": SizeTerm(lambda x: srpt_wait(x) + 2 * k * x / (1.0 - r_le(x))),
        "I": SizeTerm(lambda x: psjf_wait(x) + k * r_le(x) * x / (1.0 - r_le(x)), float(k), inv),
        "PSJF": SizeTerm(lambda x: psjf_wait(x) + (2 * k - 1) * x / (1.0 - r_le(x))),
        "FB": SizeTerm(lambda x: fb_wait(x) + (2 * k - 1) * x / (1.0 - r_bar(x))),
        "RS": SizeTerm(lambda x: (2 * k - 1) * x / (1.0 - r_le(x))),
    }


def size_term(ctx: LoadContext, name: str) -> SizeTerm:
    """Named per-size functions: srpt1, psjf1_wait, fb1, H, I, PSJF, FB, RS."""
    try:
        return _terms(ctx)[name]
    except KeyError:
        raise ValueError(f"unknown size term {name!r}") from None


def expected(ctx: LoadContext, name: str, lo: float = 0.0, hi: float = math.inf) -> float:
    """E[term(S)] (or its conditional mean over a size bin) for a named term."""
    return bin_mean(ctx, size_term(ctx, name), lo, hi)
