import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as si

from srptk import analytic as A
from srptk import dist as D

U = D.Uniform(0.0, 2.0)
HX = D.hyperexp_from_mean_scv(1.0, 10.0)
CTX1 = A.LoadContext(0.8, U, 1)
CTX10 = CTX1.with_k(10)

# frozen values for lambda = 0.8, Uniform(0, 2), x = 1
RESIDENCE_1 = 1.0760223524


def test_loads():
    assert CTX1.rho == pytest.approx(0.8)
    assert A.rho_le(CTX1, 1.0) == pytest.approx(0.2, rel=1e-14)
    assert A.rho_bar(CTX1, 1.0) == pytest.approx(0.6, rel=1e-14)
    assert A.rho_le(CTX1, 10.0) == pytest.approx(0.8)
    assert A.busy_mean(1.0, 0.5) == 2.0
    with pytest.raises(ValueError):
        A.busy_mean(1.0, 1.0)


def test_single_server_oracles():
    assert A.psjf1_wait_mean(CTX1, 1.0) == pytest.approx(0.104166666667, rel=1e-10)
    r = A.srpt1_response_mean(CTX1, 1.0)
    assert r.wait == pytest.approx(0.416666666667, rel=1e-10)
    assert r.residence == pytest.approx(RESIDENCE_1, rel=1e-9)
    assert r.total == pytest.approx(1.4927, abs=5e-5)
    fb = A.fb1_response_mean(CTX1, 1.0)
    assert fb.wait_part == pytest.approx(5 / 3, rel=1e-12)
    assert fb.residence_part == pytest.approx(2.5, rel=1e-12)


def test_residence_closed_form():
    # integral of 1 / (1 - 0.2 t^2) over [0, 1]
    c = math.sqrt(0.2)
    exact = math.atanh(c) / c
    assert A.srpt1_response_mean(CTX1, 1.0).residence == pytest.approx(exact, rel=1e-10)


def test_k10_bounds():
    assert A.bound_H(CTX10, 1.0) == pytest.approx(25.416666667, rel=1e-9)
    assert A.bound_I(CTX10, 1.0) == pytest.approx(13.36439, abs=1e-5)
    b = A.policy_bound(CTX10, 1.0, "PSJF")
    assert b.value == pytest.approx(23.854166667, rel=1e-9) and not b.partial
    f = A.policy_bound(CTX10, 1.0, "FB")
    assert f.value == pytest.approx(47.5 + 5 / 3, rel=1e-12)
    rs = A.policy_bound(CTX10, 1.0, "RS")
    assert rs.partial and rs.value == pytest.approx(23.75, rel=1e-12)


def test_k1_bounds():
    assert A.bound_I(CTX1, 1.0) == pytest.approx(1.43019, abs=1e-5)
    assert A.bound_H(CTX1, 1.0) == pytest.approx(2.916666667, rel=1e-9)


def test_bound_report_row():
    row = A.bound_report(CTX10, 1.0).as_row()
    assert list(row) == ["x", "rho_le_x", "H", "I", "psjf_bound", "fb_bound", "rs_increment"]
    assert row["rho_le_x"] == pytest.approx(0.2)


@pytest.mark.parametrize("d", [U, HX], ids=["uniform", "hyperexp"])
@pytest.mark.parametrize("rho", [0.5, 0.8, 0.95, 0.99])
def test_log_identity(d, rho):
    ctx = A.LoadContext.from_rho(rho, d)
    got = A.mean_over_sizes(ctx, lambda x: x / (1.0 - A.rho_le(ctx, x)))
    assert got == pytest.approx(math.log(1.0 / (1.0 - rho)) / ctx.lam, rel=1e-6)


def test_folded_expectation_matches_nested():
    ctx = A.LoadContext(0.8, U, 10)
    outer = lambda x: A.bound_I(ctx, x) * U.pdf(x)  # noqa: E731
    nested = si.quad(outer, 0, 2, limit=200, epsrel=1e-11)[0]
    assert A.expected(ctx, "I") == pytest.approx(nested, rel=1e-7)
    t1 = si.quad(lambda x: A.srpt1_response_mean(CTX1, x).total * U.pdf(x), 0, 2, limit=200)[0]
    assert A.expected(CTX1, "srpt1") == pytest.approx(t1, rel=1e-7)


def test_bin_mean_is_conditional():
    ctx = CTX10
    term = A.size_term(ctx, "H")
    lo, hi = 0.5, 0.9
    ref = si.quad(lambda x: term(x) * U.pdf(x), lo, hi)[0] / (U.cdf(hi) - U.cdf(lo))
    assert A.bin_mean(ctx, term, lo, hi) == pytest.approx(ref, rel=1e-8)
    with pytest.raises(ValueError):
        A.size_term(ctx, "nope")


def test_hyperexp_heavy_traffic_values():
    ctx = A.LoadContext.from_rho(0.9, HX, 10)
    assert A.expected(ctx, "I") == pytest.approx(34.618, rel=1e-3)
    assert A.expected(ctx.with_k(1), "srpt1") == pytest.approx(3.00339, rel=1e-4)


def test_rejects_unstable_and_bad_k():
    with pytest.raises(ValueError):
        A.LoadContext(1.0, U)
    with pytest.raises(ValueError):
        A.LoadContext(0.5, U, 0)
    with pytest.raises(ValueError):
        A.bound_H(CTX10, -1.0)


loads = st.floats(0.05, 0.97)
sizes = st.floats(0.01, 6.0)
ks = st.integers(1, 16)


@given(rho=loads, x=sizes, k=ks, d=st.sampled_from([U, HX]))
def test_bound_ordering(rho, x, k, d):
    ctx = A.LoadContext.from_rho(rho, d, k)
    r_le, r_bar = A.rho_le(ctx, x), A.rho_bar(ctx, x)
    assert r_le <= r_bar + 1e-12 <= rho + 2e-12
    H, I = A.bound_H(ctx, x), A.bound_I(ctx, x)
    assert I <= H * (1 + 1e-12)
    assert A.policy_bound(ctx, x, "PSJF").value <= H * (1 + 1e-12)
    # H dominates the exact single-server SRPT response
    assert H >= A.srpt1_response_mean(ctx.with_k(1), x).total
    assert A.srpt1_response_mean(ctx, x).residence >= x * (1 - 1e-12)


@given(rho=loads, x=sizes, d=st.sampled_from([U, HX]))
def test_k1_bounds_are_exact_single_server(rho, x, d):
    ctx = A.LoadContext.from_rho(rho, d, 1)
    fb = A.fb1_response_mean(ctx, x)
    assert A.policy_bound(ctx, x, "FB").value == pytest.approx(fb.wait_part + fb.residence_part, rel=1e-12)
    psjf = A.psjf1_wait_mean(ctx, x) + x / (1 - A.rho_le(ctx, x))
    assert A.policy_bound(ctx, x, "PSJF").value == pytest.approx(psjf, rel=1e-12)


@given(rho=loads, x=sizes, k=st.integers(1, 12))
def test_bounds_increase_with_k(rho, x, k):
    c = A.LoadContext.from_rho(rho, U, k)
    assert A.bound_H(c.with_k(k + 1), x) > A.bound_H(c, x)
    assert A.bound_I(c.with_k(k + 1), x) > A.bound_I(c, x)
