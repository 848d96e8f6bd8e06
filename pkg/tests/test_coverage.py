import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate, special

from riscover import blockage_analytic as ba
from riscover import coverage as cv
from riscover.channel import ChannelParams, QosTarget, gamma_threshold
from riscover.coverage import (CoverageEstimate, CoverageInputs, ReflectedPower, char_fn_indirect,
                               coverage_at, coverage_avg, coverage_direct_los, coverage_direct_nlos,
                               coverage_direct_only, coverage_terms, laplace_T, laplace_T_plus,
                               lower_tail, min_ris_search, outage, outage_at)
from riscover.errors import PoleError
from riscover.montecarlo import SimSpec, simulate_coverage
from riscover.scene import SceneConfig, equispaced_angles, substream

N_DRAWS = 1_000_000


def g(b):
    return gamma_threshold(QosTarget(b=b))


@pytest.fixture(scope="module")
def cp():
    return ChannelParams.from_db(46, 3.5e9, 1e6, -174, 2.0, antenna_gain_dBi=17)


def make(cp, b=31000, r0=40.0, nB=50, n_R=2, RB=0.2, R=100.0, **kw):
    cfg = SceneConfig(R=R, r0=r0, RB=RB, nB=nB, ris_angles=equispaced_angles(n_R))
    return CoverageInputs(cfg, cp, g(b), **kw)


def zero_pl(phi):
    return np.zeros_like(phi)


def one_pl(phi):
    return np.ones_like(phi)


def draw_reflected(inp, n, seed):
    """Independent samples of the summed reflected power under the model:
    RIS angle uniform (or fixed), LoS coin with mean P_L, Gamma fading."""
    cfg, cp = inp.cfg, inp.cp
    rng = substream(seed, 77)
    if inp.placement == "uniform":
        phi = rng.random((n, cfg.n_R)) * 2 * np.pi
    else:
        phi = np.broadcast_to(np.array(cfg.ris_angles), (n, cfg.n_R))
    if inp.pl_of_phi is None:
        pl = ba.los_probability(phi, cfg.r0, cfg.R, cfg.RB, cfg.nB, inp.form)
    else:
        pl = inp.pl_of_phi(phi)
    on = rng.random((n, cfg.n_R)) < pl
    h = rng.gamma(cp.m_nak, cp.omega / cp.m_nak, (n, cfg.n_R))
    u = cp.reflected_mean_power(cfg.r0, phi, cfg.R)
    return np.sum(np.where(on, u * h, 0.0), axis=1), rng


def within_3se(got, samples):
    se = samples.std() / math.sqrt(len(samples))
    return abs(got - samples.mean()) <= 3 * se + 1e-12, (got, samples.mean(), se)


# --- transforms ---------------------------------------------------------------

def test_laplace_at_origin(cp):
    assert laplace_T(0.0, make(cp)) == pytest.approx(1.0, abs=1e-12)
    assert char_fn_indirect(0.0, make(cp)) == pytest.approx(1.0, abs=1e-12)


def test_laplace_without_reflected_power(cp):
    inp = make(cp, pl_of_phi=zero_pl)
    u = ReflectedPower(inp).u_ref
    for s in (0.01 / u, 0.1 / u, 0.3 / u):
        assert laplace_T(s, inp) == pytest.approx(math.exp(-inp.noise_threshold * s), rel=1e-12)


def test_laplace_matches_gamma_mgf(cp):
    cfg = SceneConfig(R=100, r0=40, RB=0.2, nB=0, ris_angles=(0.0,))
    inp = CoverageInputs(cfg, cp, g(31000), pl_of_phi=one_pl, placement="fixed")
    u = float(cp.reflected_mean_power(40, 0.0, 100))
    for s in (0.01 / u, 0.1 / u, 0.3 * cp.m_nak / u, (-2 + 3j) / u):
        want = (1 - s * u * cp.omega / cp.m_nak) ** (-cp.m_nak) * np.exp(-inp.noise_threshold * s)
        assert abs(laplace_T(s, inp) - want) <= 1e-10 * abs(want)


def test_laplace_pole(cp):
    inp = make(cp)
    m = ReflectedPower(inp)
    s_pole = m.pole() / m.u_ref
    with pytest.raises(PoleError):
        laplace_T(1.01 * s_pole, inp)
    with pytest.raises(PoleError):
        laplace_T_plus(1.01 * s_pole, inp)
    with pytest.raises(ValueError):
        laplace_T_plus(0.0, inp)


def test_char_fn_bounded(cp):
    inp = make(cp)
    u = ReflectedPower(inp).u_ref
    vals = char_fn_indirect(np.linspace(-50, 50, 100) / u, inp)
    assert np.all(np.abs(vals) <= 1 + 1e-12)


def test_char_fn_vs_empirical(cp):
    inp = make(cp)
    x, _ = draw_reflected(inp, N_DRAWS, 1)
    ubar = x.mean()
    for t in (0.1 / ubar, 1 / ubar, 10 / ubar):
        got = char_fn_indirect(t, inp)
        ok_re, d_re = within_3se(got.real, np.cos(t * x))
        ok_im, d_im = within_3se(got.imag, np.sin(t * x))
        assert ok_re and ok_im, (t, d_re, d_im)


def test_positive_part_transform_degenerate_cases(cp):
    # no reflected power: T = gamma N0 is a positive constant
    inp = make(cp, pl_of_phi=zero_pl)
    s = 1 / float(cp.direct_mean_power(40))
    assert laplace_T_plus(s, inp) == pytest.approx(math.exp(-s * inp.noise_threshold), abs=1e-6)
    # huge arrays and tiny threshold: T < 0 almost surely
    big = dataclasses.replace(cp, M=4096)
    inp = make(big, b=0, pl_of_phi=one_pl)
    assert laplace_T_plus(1e-3 / ReflectedPower(inp).u_ref, inp) == pytest.approx(1.0, abs=1e-6)


def test_positive_part_transform_vs_expectation(cp):
    inp = make(cp)
    s = 0.7 / ReflectedPower(inp).u_ref
    x, _ = draw_reflected(inp, N_DRAWS, 2)
    ok, detail = within_3se(laplace_T_plus(s, inp), np.exp(-s * np.maximum(0, inp.noise_threshold - x)))
    assert ok, detail


# --- coverage branches ---------------------------------------------------------

def test_direct_only(cp):
    assert coverage_direct_only(20, cp, 0.0) == 1.0
    gam = float(cp.direct_mean_power(20)) / cp.N0
    assert coverage_direct_only(20, cp, gam) == pytest.approx(math.exp(-1))
    # 46 dBm + 17 dBi, 3.5 GHz, -174 dBm/Hz over 1 MHz, alpha 2, r0 = 20, b = 31 kbit
    hand = math.exp(-2 ** 31 * 10 ** (-14.4) * 400 / (10 ** 3.3 * (299_792_458 / (4 * math.pi * 3.5e9)) ** 2))
    assert coverage_direct_only(20, cp, g(31000)) == pytest.approx(hand, rel=1e-12)
    assert coverage_direct_only(20, cp, g(31000)) == pytest.approx(0.963782504733, abs=1e-12)


def test_direct_los_reduces_to_direct_only(cp):
    inp = make(cp, pl_of_phi=zero_pl)
    want = coverage_direct_only(40, cp, inp.gamma_th)
    for method in ("laplace", "gil-pelaez"):
        assert coverage_direct_los(inp, method=method) == pytest.approx(want, abs=1e-6)


def test_direct_los_zero_threshold(cp):
    inp = dataclasses.replace(make(cp), gamma_th=1e-30)
    assert coverage_direct_los(inp) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("b", [29000, 31000, 33000, 35000])
def test_direct_los_routes_agree(cp, b):
    inp = make(cp, b=b)
    a = coverage_direct_los(inp, method="laplace")
    c = coverage_direct_los(inp, method="gil-pelaez")
    assert a == pytest.approx(c, abs=1e-7)
    with pytest.raises(ValueError):
        coverage_direct_los(inp, method="saddle")


def test_direct_los_vs_simulation(cp):
    inp = make(cp, b=33000)
    x, rng = draw_reflected(inp, N_DRAWS, 3)
    p_d = float(cp.direct_mean_power(40)) * rng.exponential(1.0, N_DRAWS)
    ok, detail = within_3se(coverage_direct_los(inp), (p_d + x >= inp.noise_threshold).astype(float))
    assert ok, detail


def test_direct_nlos_degenerate(cp):
    assert coverage_direct_nlos(make(cp, pl_of_phi=zero_pl)) == 0.0
    inp = dataclasses.replace(make(cp, pl_of_phi=one_pl), gamma_th=1e-30)
    assert coverage_direct_nlos(inp) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("b", [29000, 31000, 33000])
def test_direct_nlos_vs_simulation(cp, b):
    inp = make(cp, b=b)
    x, _ = draw_reflected(inp, N_DRAWS, 4)
    ok, detail = within_3se(coverage_direct_nlos(inp), (x >= inp.noise_threshold).astype(float))
    assert ok, detail


def test_direct_nlos_bounded_by_continuous_mass(cp):
    inp = make(cp, b=29000, nB=400, RB=1.0)
    m = ReflectedPower(inp)
    assert 0 <= coverage_direct_nlos(inp, m) <= 1 - m.p0


def test_fixed_placement_vs_simulation(cp):
    inp = make(cp, b=32000, n_R=3, placement="fixed")
    x, rng = draw_reflected(inp, N_DRAWS, 5)
    ok, detail = within_3se(coverage_direct_nlos(inp), (x >= inp.noise_threshold).astype(float))
    assert ok, detail


# --- lower tail -------------------------------------------------------------------

def _single_gamma(cp, b):
    cfg = SceneConfig(R=100, r0=40, RB=0.2, nB=0, ris_angles=(0.0,))
    inp = CoverageInputs(cfg, cp, g(b), pl_of_phi=one_pl, placement="fixed")
    return inp, ReflectedPower(inp)


@pytest.mark.parametrize("b", [20000, 24000, 29000, 31000, 34000])
def test_lower_tail_matches_gamma_cdf(cp, b):
    inp, m = _single_gamma(cp, b)
    ct = inp.noise_threshold / m.u_ref
    want = special.gammainc(cp.m_nak, ct * cp.m_nak / cp.omega)
    assert lower_tail(m, ct) == pytest.approx(want, rel=1e-8)


@pytest.mark.parametrize("b", [22000, 29000, 33000])
def test_lower_tail_with_direct_term(cp, b):
    inp, m = _single_gamma(cp, b)
    ct = inp.noise_threshold / m.u_ref
    d = float(cp.direct_mean_power(40)) / m.u_ref
    k, theta = cp.m_nak, cp.omega / cp.m_nak

    def dens(x):
        return math.exp((k - 1) * math.log(x) - x / theta - special.gammaln(k) - k * math.log(theta))

    want, _ = integrate.quad(lambda x: dens(x) * -math.expm1(-(ct - x) / d), 0, ct,
                             epsabs=0, epsrel=1e-12, limit=200)
    assert lower_tail(m, ct, direct=d) == pytest.approx(want, rel=1e-7)


@pytest.mark.parametrize("r0", [10.0, 40.0, 80.0])
@pytest.mark.parametrize("b", [29000, 31000, 33000])
def test_outage_route_agrees_with_coverage(cp, r0, b):
    inp = make(cp, b=b, r0=r0)
    assert outage_at(r0, inp) == pytest.approx(1 - coverage_at(r0, inp), abs=1e-8)


# --- combination and averaging ---------------------------------------------------

def test_coverage_at_without_blockages_is_direct_los(cp):
    inp = make(cp, nB=0)
    assert coverage_at(40, inp) == pytest.approx(coverage_direct_los(inp), abs=1e-12)


def test_coverage_at_with_direct_always_blocked(cp, monkeypatch):
    inp = make(cp)
    want = coverage_direct_nlos(inp)
    monkeypatch.setattr(cv.ba, "q_direct", lambda *a: 1.0)
    assert coverage_at(40, inp) == pytest.approx(want, abs=1e-12)


def test_coverage_terms_weights(cp):
    inp = make(cp)
    pc1, pc2, qb = coverage_terms(40, inp)
    assert qb == pytest.approx(ba.q_direct(40, 100, 0.2, 50))
    assert coverage_at(40, inp) == pytest.approx(pc1 * (1 - qb) + pc2 * qb)


def test_coverage_at_vs_scene_simulation(cp):
    inp = make(cp, b=33000, r0=60, nB=20)
    sim = simulate_coverage(SimSpec(inp.cfg, cp, inp.gamma_th, n_trials=50_000, seed=3,
                                    ris_law="uniform"))
    se = sim.std_error
    assert abs(coverage_at(60, inp) - sim.coverage.value) <= 3 * se + 0.01


def test_coverage_nonincreasing_in_threshold(cp):
    vals = [coverage_at(40, make(cp, b=b)) for b in np.linspace(28000, 36000, 10)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_outage_values():
    assert outage(0) == 1 and outage(1) == 0 and outage(0.25) == 0.75


def test_average_of_constant_coverage(cp):
    # the direct link is never blocked and carries no noise threshold
    inp = dataclasses.replace(make(cp, nB=0), gamma_th=0.0)
    assert coverage_avg(inp) == 1.0


def test_average_mean_value_bound(cp):
    inp = make(cp, b=31000, RB=0.5)
    grid = np.linspace(0.5, 99.5, 40)
    vals = [coverage_at(r, inp) for r in grid]
    assert min(vals) - 1e-9 <= coverage_avg(inp) <= max(vals) + 1e-9


def test_average_vs_model_simulation(cp):
    inp = make(cp, b=32000, R=50, nB=20, n_R=2)
    spec = SimSpec(inp.cfg, cp, inp.gamma_th, n_trials=200_000, seed=8,
                   correlation_model="intra_ris_correlated", user_law="uniform", ris_law="uniform")
    sim = simulate_coverage(spec)
    assert abs(coverage_avg(inp) - sim.coverage.value) <= 3 * sim.std_error


def test_coverage_estimate_validation():
    CoverageEstimate(0.5)
    for kw in (dict(value=1.5), dict(value=0.5, half_width=-1), dict(value=0.5, method="guess")):
        with pytest.raises(ValueError):
            CoverageEstimate(**kw)


def test_inputs_validation(cp):
    with pytest.raises(ValueError):
        make(cp, placement="random")
    with pytest.raises(ValueError):
        dataclasses.replace(make(cp), gamma_th=-1.0)


# --- minimum RIS count ---------------------------------------------------------

def test_min_ris_without_blockages(cp):
    base = make(cp, b=31000, nB=0, placement="fixed")
    res = min_ris_search(0.0, 0.5, base, 8)
    assert res.n_R == 1 and res.nB == 0
    assert res.zero_ris_suffices == (res.outage_previous is None and cv.outage_avg(
        cv.with_ris_count(base, 0, 0)) <= 0.5)


def test_min_ris_unattainable(cp):
    base = make(cp, b=37000, placement="fixed")
    res = min_ris_search(2e-3, 1e-6, base, 3)
    assert res.n_R is None and res.outage_previous > 1e-6


def test_min_ris_nondecreasing_in_density(cp):
    base = make(cp, b=31000, RB=0.5, placement="fixed")
    counts = [min_ris_search(lam, 0.1, base, 16).n_R for lam in (1e-4, 1e-3, 4e-3)]
    assert counts == sorted(counts)


def test_min_ris_target_validation(cp):
    with pytest.raises(ValueError):
        min_ris_search(1e-3, 1.0, make(cp), 4)
