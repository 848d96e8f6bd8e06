import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from riscover.channel import (ChannelParams, QosTarget, db_to_linear, dbm_to_watt,
                              draw_direct_fading, draw_indirect_fading, ell, gamma_threshold,
                              path_loss_constant, received_power)
from riscover.scene import LinkVisibility, SceneConfig, substream


def test_unit_conversions():
    assert dbm_to_watt(30) == pytest.approx(1.0)
    assert db_to_linear(20) == pytest.approx(100.0)
    assert path_loss_constant(3.5e9) == pytest.approx((299_792_458 / (4 * math.pi * 3.5e9)) ** 2)


def test_baseline_budget(baseline_cp):
    assert baseline_cp.p_eff == pytest.approx(10 ** 3.3, rel=1e-12)
    assert baseline_cp.K == pytest.approx(4.646e-5, rel=1e-4)
    assert baseline_cp.N0 == pytest.approx(10 ** (-17.4) * 1e-3 * 1e6, rel=1e-12)


@pytest.mark.parametrize("field,value", [("P", 0), ("K", -1), ("alpha", 0), ("M", 0),
                                         ("omega", 0), ("N0", 0), ("m_nak", 0.4)])
def test_channel_params_validation(field, value):
    kw = dict(P=1, K=1, alpha=2)
    kw[field] = value
    with pytest.raises(ValueError):
        ChannelParams(**kw)


def test_gamma_threshold():
    assert gamma_threshold(QosTarget(b=0)) == 1.0
    assert gamma_threshold(QosTarget(b=1000)) == pytest.approx(2.0)
    assert gamma_threshold(QosTarget(b=500)) == pytest.approx(math.sqrt(2))
    assert gamma_threshold(QosTarget(b=600, beta=0.5, T=1e-3, W=1e6)) == pytest.approx(2 ** 1.2)
    with pytest.raises(OverflowError):
        gamma_threshold(QosTarget(b=1_000_001))


def test_qos_validation():
    for kw in (dict(b=-1), dict(b=1, beta=0), dict(b=1, beta=1.5), dict(b=1, T=0)):
        with pytest.raises(ValueError):
            QosTarget(**kw)


def test_ell():
    assert ell(20, 0.0, 100) == pytest.approx(80)
    assert ell(20, math.pi, 100) == pytest.approx(120)
    d = ell(20, np.linspace(0.01, math.pi - 0.01, 50), 100)
    assert np.all(np.diff(d) > 0)


def test_fading_moments():
    g = substream(0, 1)
    h_d = draw_direct_fading(g, 1_000_000)
    h_i = draw_indirect_fading(g, 3.0, 1.0, 1_000_000)
    assert abs(h_d.mean() - 1) < 0.01
    assert abs(h_i.mean() - 1) < 0.01
    assert abs(h_i.var() - 1 / 3) < 0.02


def test_shape_one_nakagami_is_exponential():
    h = draw_indirect_fading(substream(5), 1.0, 1.0, 50_000)
    assert stats.kstest(h, "expon").pvalue > 1e-3


def _cfg():
    return SceneConfig(R=100, r0=20, RB=0.2, nB=0, ris_angles=(0.5, 2.0))


def test_received_power_cases():
    cp = ChannelParams(P=2.0, K=1e-3, alpha=2.0, M=8)
    cfg = _cfg()
    assert received_power(LinkVisibility(False, [False, False]), 1.3, [1, 1], cp, cfg) == 0
    only_d = received_power(LinkVisibility(True, [False, False]), 1.0, [1, 1], cp, cfg)
    assert only_d == pytest.approx(2.0 * 1e-3 / 400)
    full = received_power(LinkVisibility(True, [True, True]), 1.0, [1.0, 1.0], cp, cfg)
    terms = [2e-3 / 400]
    for phi in (0.5, 2.0):
        d2 = (100 * math.cos(phi) - 20) ** 2 + (100 * math.sin(phi)) ** 2
        terms.append(2e-3 * 64 / (d2 * 100 ** 2))
    assert full == pytest.approx(sum(terms), rel=1e-12)
    with pytest.raises(ValueError):
        received_power(LinkVisibility(True, [True, True]), 1.0, [1.0], cp, cfg)


def test_doubling_elements_quadruples_indirect_terms():
    cfg = _cfg()
    vis = LinkVisibility(False, [True, True])
    a = received_power(vis, 1.0, [0.7, 1.9], ChannelParams(P=1, K=1, alpha=2.5, M=16), cfg)
    b = received_power(vis, 1.0, [0.7, 1.9], ChannelParams(P=1, K=1, alpha=2.5, M=32), cfg)
    assert b == pytest.approx(4 * a, rel=1e-13)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10),
       st.booleans(), st.booleans(), st.booleans(), st.floats(0, 5))
def test_received_power_monotone(hd, h1, h2, d, i1, i2, bump):
    cp = ChannelParams(P=1, K=1, alpha=2, M=4)
    cfg = _cfg()
    base = received_power(LinkVisibility(d, [i1, i2]), hd, [h1, h2], cp, cfg)
    assert base >= 0
    assert received_power(LinkVisibility(d, [i1, i2]), hd + bump, [h1, h2 + bump], cp, cfg) >= base
    assert received_power(LinkVisibility(True, [True, i2]), hd, [h1, h2], cp, cfg) >= base
