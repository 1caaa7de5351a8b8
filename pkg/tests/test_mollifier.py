import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carleman_lab import bootstrap as bs
from carleman_lab import mollifier as ml
from carleman_lab import pwpoly as pw
from carleman_lab import weights as w
from carleman_lab.chains import BoxChain
from carleman_lab.errors import KExhausted, NotApplicable


def sobolev_widths_oracle(k, p, eps):
    """Schedule written out term by term."""
    a = [min((eps ** p / (2 * (k + 1))) ** (1 / (1 - p)), eps / 2)]
    for l in range(2, k + 2):
        prod = math.prod(a)
        a.append(min((eps ** p * prod ** p / (2 ** l * (k + 1))) ** (1 / (1 - p)), a[-1] / 2))
    return a


# -- Sobolev schedule -------------------------------------------------------------------


def test_sobolev_first_width_examples():
    assert ml.sobolev_schedule(0, 0.5, 0.1).widths[0] == pytest.approx(0.025)
    assert ml.sobolev_schedule(1, 0.5, 0.1).widths[0] == pytest.approx(0.00625)


@given(k=st.integers(0, 4), p=st.floats(0.1, 0.9), eps=st.floats(1e-3, 1.0))
def test_sobolev_schedule_matches_formula(k, p, eps):
    plan = ml.sobolev_schedule(k, p, eps)
    np.testing.assert_allclose(plan.widths, sobolev_widths_oracle(k, p, eps), rtol=1e-12)
    assert np.all(plan.widths[1:] <= plan.widths[:-1] / 2 * (1 + 1e-12))
    assert plan.support_length <= eps


@settings(max_examples=20)
@given(k=st.integers(0, 3), p=st.sampled_from([0.3, 0.5, 0.8]), eps=st.sampled_from([0.5, 0.1, 0.01]))
def test_sobolev_build_passes_certificates(k, p, eps):
    build = ml.build_invisible_sobolev(k, p, eps)
    assert build.plan.passed
    names = {c.name for c in build.plan.certificates}
    assert {"mass", "support", "quasinorm"} <= names


def test_sobolev_per_order_bound():
    k, p, eps = 2, 0.5, 0.1
    build = ml.build_invisible_sobolev(k, p, eps)
    widths = list(build.plan.widths)
    for n in range(k + 1):
        d = pw.chain_derivative(widths, n).regular
        assert pw.lp_quasinorm(d, p) <= eps ** p / (k + 1) * (1 + 1e-9)


def test_sobolev_phi_nonnegative():
    build = ml.build_invisible_sobolev(1, 0.8, 0.5)
    if build.phi is not None:
        _, y = build.phi.sample(2001)
        assert y.min() >= -1e-12


# -- Carleman schedule ---------------------------------------------------------------------


def test_carleman_schedule_routes_expchar_through_minorant():
    sw = ml.schedule_weight(w.exp_char(1, 0.5), 0.5)
    assert sw.routed and sw.weight.kind == "minorant"


def test_carleman_schedule_is_decreasing():
    plan = ml.carleman_schedule(w.exp_char(1, 0.5), 0.5, 0.5, K=32)
    assert plan.chain.is_decreasing()
    assert plan.intermediates["alpha_decreasing"]


def test_carleman_parameters_for_superpolynomial_growth():
    plan = ml.carleman_schedule(w.exp_char(1, 0.5), 0.5, 0.5, K=16)
    assert plan.params["r"] == pytest.approx(0.25) and plan.params["rho"] == 1.0


def test_carleman_tail_separation_bound():
    plan = ml.carleman_schedule(w.exp_char(1, 0.5), 0.5, 0.5, K=64)
    log_alpha = np.asarray(plan.intermediates["log_alpha"])
    c_sum = plan.intermediates["c_sum"]
    a = plan.widths
    for n in range(1, 10):
        assert math.fsum(a[n:]) <= c_sum * math.exp(log_alpha[n]) * (1 + 1e-9)


def test_carleman_requires_divergent_kappa():
    with pytest.raises(NotApplicable):
        ml.carleman_schedule(w.gevrey(1.5), 0.5, 0.5)


def test_carleman_k_search_exhausts():
    with pytest.raises(KExhausted):
        ml.carleman_schedule(w.exp_char(1, 0.5), 0.5, 1e-6, k_max=16)


def test_carleman_build_certificates():
    build = ml.build_invisible_carleman(w.exp_char(1, 0.5), 0.5, 0.5, n_check=6)
    plan = build.plan
    assert plan.passed
    assert plan.support_length <= 0.5
    assert plan.certificate("tameness_window").passed
    assert {f"norm[{n}]" for n in range(7)} <= {c.name for c in plan.certificates}


# -- tameness -------------------------------------------------------------------------------


def test_tameness_of_fast_spline_goes_to_zero():
    chain = BoxChain(-math.log(2.0) * np.arange(60))
    rep = ml.tameness_diagnostic(chain, 0.5, range(10, 41))
    assert rep.non_increasing_top and rep.theta_hat < 1e-3


def test_tameness_of_gaussian_goes_to_zero():
    g = bs.HermiteFunction((1.0,))
    rep = ml.tameness_diagnostic(lambda n: math.log(bs.hermite_derivative_sup(g, n).measured), 0.5, range(4, 25))
    assert rep.theta_hat < 0.01 and rep.non_increasing_top
