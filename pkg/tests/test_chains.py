import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carleman_lab import chains
from carleman_lab import pwpoly as pw
from carleman_lab.chains import BoxChain
from carleman_lab.errors import ConfigError


@st.composite
def decreasing_widths(draw, min_size=3, max_size=7):
    k = draw(st.integers(min_size, max_size))
    ws = sorted(draw(st.lists(st.floats(0.02, 1.0), min_size=k, max_size=k)), reverse=True)
    if draw(st.booleans()):
        ws[1] = ws[0]  # coincident leading widths merge atoms
    return ws


def contains(enc, value, slack=1e-9):
    lv = math.log(value)
    return enc.log_lo - slack <= lv <= enc.log_hi + slack


@st.composite
def long_widths(draw):
    """Past the materialization cap, yet small enough for an exact pwpoly oracle."""
    k = chains.MATERIALIZE_MAX + 1
    ratio = draw(st.floats(0.3, 0.6))
    ws = [ratio ** l for l in range(k)]
    if draw(st.booleans()):
        ws[1] = ws[0]
    return ws


@settings(max_examples=8)
@given(ws=long_widths(), p=st.sampled_from([0.3, 0.5, 0.8]), data=st.data())
def test_enclosures_contain_exact_values(ws, p, data):
    n = data.draw(st.integers(0, 4))
    c = BoxChain(np.log(ws))
    assert not c.materializable()
    d = pw.chain_derivative(ws, n).regular
    assert contains(c.lp_enclosure(n, p), pw.lp_quasinorm(d, p))
    assert contains(c.sup_enclosure(n), pw.sup_norm(d))


def test_separated_chain_enclosure_is_tight():
    c = BoxChain(np.log([0.4 ** l for l in range(12)]))
    encs = [c.lp_enclosure(n, 0.5) for n in range(1, 6)] + [c.sup_enclosure(n) for n in range(1, 6)]
    assert all(e.method == "enclosure" and e.log_hi - e.log_lo < 1e-3 for e in encs)


def test_coincident_widths_still_enclosed():
    ws = [1.0, 1.0] + [0.3 ** l for l in range(1, 11)]
    c = BoxChain(np.log(ws))
    # at n = 1 the two unit boxes overlap every copy, so only the bound is available
    assert c.lp_enclosure(1, 0.5).method == "bound"
    for n in range(2, 5):
        exact = pw.lp_quasinorm(pw.chain_derivative(ws, n).regular, 0.5)
        e = c.lp_enclosure(n, 0.5)
        assert e.method == "enclosure" and contains(e, exact)


@given(ws=decreasing_widths(), log_lam=st.floats(-6.0, 2.0), p=st.sampled_from([0.3, 0.5, 0.8]), data=st.data())
def test_dilation_scaling_law(ws, log_lam, p, data):
    n = data.draw(st.integers(0, len(ws) - 1))
    base = BoxChain(np.log(ws))
    big = base.dilated(log_lam)
    lp_shift = (1 - p - n * p) * log_lam
    assert big.lp_enclosure(n, p).log_mid == pytest.approx(base.lp_enclosure(n, p).log_mid + lp_shift, abs=1e-8)
    assert big.sup_enclosure(n).log_mid == pytest.approx(base.sup_enclosure(n).log_mid - (1 + n) * log_lam, abs=1e-8)


@given(ws=decreasing_widths(), p=st.sampled_from([0.3, 0.5, 0.8]), data=st.data())
def test_holder_bound_is_tighter(ws, p, data):
    n = data.draw(st.integers(0, len(ws) - 1))
    c = BoxChain(np.log(ws))
    assert c.log_lp_holder_bound(n, p) <= c.log_lp_bound(n, p) + 1e-12


def test_long_chain_without_materializing():
    lw = -0.7 * np.arange(1, 200) ** 1.2
    c = BoxChain(lw)
    assert not c.materializable()
    e = c.sup_enclosure(3)
    assert e.log_lo <= e.log_hi <= c.log_sup_bound(3) + 1e-9
    assert c.log_support() == pytest.approx(float(np.logaddexp.reduce(lw)), abs=1e-12)


def test_head_keeps_leading_factors():
    c = BoxChain(np.log([0.5, 0.25, 1e-12, 1e-13]))
    h = c.head()
    # rescaled so the first width is 1; the two tiny factors fall below the floor
    assert h.support[1] == pytest.approx(1.5)
    assert c.head(rel_floor=0, max_factors=1).support[1] == pytest.approx(1.0)
    assert c.head(rel_floor=0).support[1] == pytest.approx(1.5 + 4e-12)


def test_order_out_of_range():
    with pytest.raises(ConfigError):
        BoxChain(np.log([0.5, 0.25])).lp_enclosure(2, 0.5)
