import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from srptk import dist as D

U = D.Uniform(0.0, 2.0)
HX = D.hyperexp_from_mean_scv(1.0, 10.0)
ALL = [
    U,
    D.Exponential(1.5),
    HX,
    D.Pareto(1.0, 3.0),
    D.BoundedPareto(0.5, 20.0, 1.5),
    D.Deterministic(1.25),
]


def test_uniform_oracle_at_one():
    m = D.moments(U, 1.0)
    assert m.pdf == 0.5 and m.cdf == 0.5 and m.mean == 1.0
    assert m.partial_mean == pytest.approx(0.25, abs=1e-15)
    assert m.partial_m2 == pytest.approx(1 / 6, abs=1e-15)
    assert m.trunc_mean == pytest.approx(0.75, abs=1e-15)


def test_balanced_hyperexp_parameters():
    assert HX.p1 == pytest.approx(0.9522670168666454, rel=1e-14)
    assert HX.rate1 == pytest.approx(1.9045340337, rel=1e-9)
    assert HX.rate2 == pytest.approx(0.0954659663, rel=1e-9)
    assert HX.mean() == pytest.approx(1.0, rel=1e-14)
    assert HX.scv() == pytest.approx(10.0, rel=1e-12)
    # balanced means: each phase carries half the work
    assert HX.p1 / HX.rate1 == pytest.approx((1 - HX.p1) / HX.rate2, rel=1e-14)


@pytest.mark.parametrize("d", ALL, ids=lambda d: d.to_literal()["kind"])
@pytest.mark.parametrize("x", [0.3, 1.0, 1.7, 5.0])
def test_partial_moments_match_scipy(d, x):
    pts = [p for p in d.breakpoints() if 0 < p < x]
    at = sum(a * w for a, w in d.atoms() if a <= x)
    at2 = sum(a * a * w for a, w in d.atoms() if a <= x)
    pm = integrate.quad(lambda t: t * d.pdf(t), 0, x, points=pts or None, limit=200)[0] + at
    pm2 = integrate.quad(lambda t: t * t * d.pdf(t), 0, x, points=pts or None, limit=200)[0] + at2
    tm = integrate.quad(d.sf, 0, x, points=pts or None, limit=200)[0]
    assert d.partial_mean(x) == pytest.approx(pm, rel=1e-8, abs=1e-12)
    assert d.partial_m2(x) == pytest.approx(pm2, rel=1e-8, abs=1e-12)
    assert d.trunc_mean(x) == pytest.approx(tm, rel=1e-8, abs=1e-12)
    assert d.trunc_m2(x) == pytest.approx(pm2 + x * x * d.sf(x), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("d", ALL, ids=lambda d: d.to_literal()["kind"])
def test_literal_round_trip(d):
    assert D.from_literal(d.to_literal()) == d


def test_config_literals():
    assert D.from_literal({"kind": "uniform", "a": 0, "b": 2}) == U
    h = D.from_literal({"kind": "hyperexp2", "mean": 1, "scv": 10})
    assert h == HX
    assert D.from_literal({"kind": "exponential", "mean": 2.0}).rate == 0.5
    with pytest.raises(ValueError):
        D.from_literal({"kind": "weibull"})
    with pytest.raises(ValueError):
        D.from_literal({"a": 1})


def test_pareto_guard():
    with pytest.raises(ValueError):
        D.Pareto(1.0, 2.0)
    with pytest.raises(ValueError):
        D.Pareto(1.0, 1.0, allow_heavy_tail=True)
    p = D.Pareto(1.0, 1.5, allow_heavy_tail=True)
    assert math.isinf(p.second_moment())


def test_moments_rejects_bad_x():
    for bad in (-1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            D.moments(U, bad)


def test_samples_are_reproducible_and_unbiased():
    a = HX.sample_n(D.make_stream(5), 200_000)
    b = HX.sample_n(D.make_stream(5), 200_000)
    assert np.array_equal(a, b)
    assert a.mean() == pytest.approx(1.0, rel=0.05)
    u = U.sample_n(D.make_stream(1), 100_000)
    assert u.min() > 0 and u.max() <= 2
    assert D.sample(U, D.make_stream(2)) > 0


@pytest.mark.parametrize("d", ALL[:5], ids=lambda d: d.to_literal()["kind"])
def test_quantile_inverts_cdf(d):
    for p in (0.05, 0.5, 0.95):
        assert d.cdf(d.quantile(p)) == pytest.approx(p, abs=1e-10)


xs = st.floats(min_value=0.0, max_value=50.0, allow_nan=False)


@given(d=st.sampled_from(ALL), x=xs, y=xs)
def test_moment_monotonicity(d, x, y):
    lo, hi = sorted((x, y))
    assert d.cdf(lo) <= d.cdf(hi) + 1e-15
    assert d.partial_mean(lo) <= d.partial_mean(hi) + 1e-12
    assert d.trunc_mean(lo) <= d.trunc_mean(hi) + 1e-12
    # E[S 1(S<=x)] <= E[min(S,x)] <= min(x, E[S])
    assert d.partial_mean(hi) <= d.trunc_mean(hi) + 1e-12
    assert d.trunc_mean(hi) <= min(hi, d.mean()) + 1e-12
    assert d.partial_m2(hi) <= d.trunc_m2(hi) + 1e-12


@given(d=st.sampled_from(ALL))
def test_limits(d):
    big = 1e6
    assert d.partial_mean(big) == pytest.approx(d.mean(), rel=1e-4)
    assert d.trunc_mean(big) == pytest.approx(d.mean(), rel=1e-4)
    assert d.partial_mean(0.0) == 0.0 and d.trunc_mean(0.0) == 0.0
