import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as si

from srptk.quadrature import QuadratureError, integrate, quad


def test_polynomial_exact():
    r = integrate(lambda t: 3 * t * t, 0.0, 2.0)
    assert r.value == pytest.approx(8.0, rel=1e-14)
    assert r.intervals >= 1


def test_kink_with_breakpoint():
    f = lambda t: abs(t - 0.7)  # noqa: E731
    assert quad(f, 0.0, 1.0, breakpoints=[0.7]) == pytest.approx(0.5 * (0.49 + 0.09), rel=1e-12)


def test_infinite_tail():
    assert quad(lambda t: math.exp(-t), 0.0, math.inf) == pytest.approx(1.0, rel=1e-9)
    assert quad(lambda t: 1.0 / (1 + t) ** 3, 0.0, math.inf) == pytest.approx(0.5, rel=1e-9)


def test_empty_and_reversed():
    assert quad(math.sin, 1.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        quad(math.sin, 2.0, 1.0)


def test_interval_cap():
    with pytest.raises(QuadratureError):
        integrate(lambda t: math.sin(1.0 / t) if t > 0 else 0.0, 0.0, 1.0, max_intervals=50)


@given(
    a=st.floats(0.0, 5.0),
    w=st.floats(0.01, 5.0),
    c=st.floats(-3.0, 3.0),
)
def test_matches_scipy(a, w, c):
    f = lambda t: math.exp(c * math.sin(t)) / (1 + t)  # noqa: E731
    ref = si.quad(f, a, a + w, epsabs=1e-13, epsrel=1e-12)[0]
    assert quad(f, a, a + w) == pytest.approx(ref, rel=1e-8, abs=1e-11)
