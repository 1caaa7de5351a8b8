import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P
from scipy import integrate

from carleman_lab import bootstrap as bs
from carleman_lab import mollifier as ml
from carleman_lab import pwpoly as pw
from carleman_lab import weights as w
from carleman_lab.errors import DistributionalDerivative, DivergentKappa

H = bs.HermiteFunction
HERMITE_CORPUS = [H((1.0,)), H((0.0, 1.0)), H((-1.0, 0.0, 1.0))]
SQRT2_EXP = math.sqrt(2) * math.exp(-0.5)  # max |(e^{-x^2})'| at x = 1/sqrt 2

coeffs = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=11).filter(
    lambda c: any(abs(v) > 1e-3 for v in c)
)


def derivative_poly_oracle(q, n):
    """Coefficients of e^{x^2} d^n/dx^n (q e^{-x^2}) by repeated q' - 2xq."""
    q = np.asarray(q, dtype=float)
    for _ in range(n):
        q = P.polysub(P.polyder(q), P.polymulx(2 * q)) if q.size > 1 else P.polymulx(-2 * q)
    return q


# -- Hermite operator -----------------------------------------------------------------


def test_L_examples():
    np.testing.assert_array_equal(bs.hermite_L([1.0]), [0.0, -2.0])
    np.testing.assert_array_equal(bs.hermite_L([0.0, 1.0]), [1.0, 0.0, -2.0])


@given(q=coeffs)
def test_L_coefficient_bound(q):
    Lq = bs.hermite_L(q)
    assert Lq.size <= len(q) + 1
    assert np.max(np.abs(Lq)) <= (len(q) + 1) * np.max(np.abs(q)) * (1 + 1e-12)


@given(q=coeffs, n=st.integers(0, 8))
def test_derivative_poly_matches_iteration(q, n):
    got = H(tuple(q)).derivative_poly(n)
    want = derivative_poly_oracle(q, n)
    m = max(got.size, want.size)
    scale = max(1.0, float(np.max(np.abs(want))))
    np.testing.assert_allclose(np.pad(got, (0, m - got.size)), np.pad(want, (0, m - want.size)), atol=1e-9 * scale)


def test_evaluation_matches_definition():
    f = H((1.0,))
    x = np.array([0.0, 1.0])
    np.testing.assert_allclose(f(x, 1), -2 * x * np.exp(-x ** 2), atol=1e-15)


# -- sup norms ---------------------------------------------------------------------------


def test_sup_examples():
    s0 = bs.hermite_derivative_sup(H((1.0,)), 0)
    assert s0.measured == pytest.approx(1.0) and s0.bound >= 1.0
    s1 = bs.hermite_derivative_sup(H((1.0,)), 1)
    assert s1.measured == pytest.approx(SQRT2_EXP, rel=1e-12)
    assert s1.bound == pytest.approx(6 * math.sqrt(0.5) * math.exp(-0.5), rel=1e-12)


@pytest.mark.parametrize("f", HERMITE_CORPUS, ids=["1", "x", "x2-1"])
def test_sup_below_bound_up_to_40(f):
    for n in range(0, 41, 3):
        s = bs.hermite_derivative_sup(f, n)
        assert s.holds, n


@settings(max_examples=15)
@given(q=coeffs, n=st.integers(0, 12))
def test_sup_matches_dense_sampling(q, n):
    f = H(tuple(q))
    s = bs.hermite_derivative_sup(f, n)
    x = np.linspace(-s.radius, s.radius, 200001)
    dense = float(np.max(np.abs(f(x, n))))
    assert dense <= s.measured * (1 + 1e-9) + 1e-300
    assert s.measured <= dense * (1 + 1e-5) + 1e-12


@pytest.mark.parametrize("f", HERMITE_CORPUS, ids=["1", "x", "x2-1"])
def test_hermite_tameness_goes_to_zero(f):
    vals = [0.5 ** n * math.log(bs.hermite_derivative_sup(f, n).measured) for n in range(10, 25)]
    assert all(v > 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3


# -- Lp norms --------------------------------------------------------------------------------


def test_gaussian_lp_closed_form():
    assert bs.hermite_lp(H((1.0,)), 0, 0.5) == pytest.approx(math.sqrt(math.pi / 0.5), rel=1e-10)


@pytest.mark.parametrize("n, p", [(1, 0.5), (3, 0.3), (5, 0.8)])
def test_hermite_lp_matches_quad(n, p):
    f = H((-1.0, 0.0, 1.0))
    want, _ = integrate.quad(lambda x: abs(f(np.array([x]), n)[0]) ** p, -12, 12, limit=400, epsabs=1e-13)
    assert bs.hermite_lp(f, n, p) == pytest.approx(want, rel=1e-7)


def test_gevrey_fit_below_three_halves():
    g = bs.hermite_lp_growth(H((1.0,)), 0.5, range(0, 13))
    assert g.sigma <= 1.6


def test_gaussian_has_finite_gevrey_window():
    qn, _ = bs.quasinorm_window(H((1.0,)), w.gevrey(1.5), 0.5)
    assert math.isfinite(qn) and qn > 0


# -- bootstrap inequalities --------------------------------------------------------------------


def test_step_triangle_and_zero():
    assert bs.bootstrap_step_check(pw.iterated_box([1.0, 1.0]), 0.5) >= 0
    assert bs.bootstrap_step_check(pw.PiecewisePoly.zero(0.0, 1.0), 0.5) == 0.0


@settings(max_examples=20)
@given(ws=st.lists(st.floats(0.05, 1.0), min_size=2, max_size=6), p=st.sampled_from([0.3, 0.5, 0.8]))
def test_step_holds_on_splines(ws, p):
    assert bs.bootstrap_step_check(pw.iterated_box(ws), p) >= -1e-9


def test_chain_order_one_is_step():
    f = pw.iterated_box([0.6, 0.3, 0.2])
    c = bs.bootstrap_chain_check(f, 0.5, 1)
    lhs = pw.sup_norm(f)
    d = pw.derivative(f, 1).regular
    rhs = pw.sup_norm(d) ** 0.5 * pw.lp_quasinorm(d, 0.5)
    assert c.log_lhs == pytest.approx(math.log(lhs)) and c.log_rhs == pytest.approx(math.log(rhs))


def test_chain_on_smooth_spline_and_gaussian():
    assert bs.bootstrap_chain_check(pw.iterated_box([0.5 ** l for l in range(8)]), 0.5, 3).holds
    assert bs.bootstrap_chain_check(H((1.0,)), 0.5, 5).holds


def test_chain_refuses_atoms():
    with pytest.raises(DistributionalDerivative):
        bs.bootstrap_chain_check(pw.iterated_box([0.5, 0.25]), 0.5, 2)


@settings(max_examples=15)
@given(ws=st.lists(st.floats(0.05, 1.0), min_size=3, max_size=6), p=st.sampled_from([0.3, 0.5, 0.8]), data=st.data())
def test_chain_never_looser_than_greedy(ws, p, data):
    f = pw.iterated_box(ws)
    n = data.draw(st.integers(1, len(ws) - 1))
    c = bs.bootstrap_chain_check(f, p, n)
    assert c.log_rhs <= bs.greedy_step_log_bound(f, p, n) + 1e-9
    assert c.slack >= -1e-9


# -- sup control --------------------------------------------------------------------------------


def test_sup_control_constant_weights():
    for k in range(5):
        assert bs.sup_control_bound(w.constant(), 0.5, 0.0, k).log_value == 0.0
    assert bs.sup_control_bound(w.constant(), 0.5, 1.0, 2).log_value == pytest.approx(4.0)


def test_sup_control_gevrey_formula():
    M, p, k = w.gevrey(1.5), 0.5, 3
    q = 1 - p
    kap = w.kappa(M, p).value
    want = p * q ** (-k - 1) * kap - math.fsum(q ** (j - k - 1) * p * M.logM(j) for j in range(1, k + 1))
    assert bs.sup_control_bound(M, p, 0.0, k).log_value == pytest.approx(want, rel=1e-10)


@given(k=st.integers(0, 4), p=st.sampled_from([0.3, 0.5, 0.8]), theta=st.floats(0, 2),
       sigma=st.sampled_from([1.0, 1.5, 2.0]))
def test_sup_control_shift_identity(k, p, theta, sigma):
    M = w.gevrey(sigma)
    q = 1 - p
    via_shift = theta * q ** -k + (p / q) * w.kappa(w.shift(M, k), p).value
    assert bs.sup_control_bound(M, p, theta, k).log_value == pytest.approx(via_shift, rel=1e-9, abs=1e-9)


def test_sup_control_refuses_divergent_kappa():
    with pytest.raises(DivergentKappa):
        bs.sup_control_bound(w.exp_char(1, 0.5), 0.5, 0.0, 1)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_verify_sup_control_gaussian(k):
    assert bs.verify_sup_control(H((1.0,)), w.gevrey(1.5), 0.5, 0.0, k).passed


def test_verify_sup_control_zero_function():
    assert bs.verify_sup_control(H((0.0,)), w.gevrey(1.5), 0.5, 0.0, 1).passed


def test_sobolev_mollifier_under_sobolev_weights_is_vacuous():
    phi = ml.build_invisible_sobolev(1, 0.5, 0.5).phi
    for k in (0, 1):
        c = bs.verify_sup_control(phi, w.sobolev_degenerate(1), 0.5, 0.0, k, on_divergent="vacuous")
        assert c.vacuous and c.passed
    with pytest.raises(DivergentKappa):
        bs.verify_sup_control(phi, w.sobolev_degenerate(1), 0.5, 0.0, 0)
