"""Analytical SNR coverage and outage.

With the direct link in LoS the user is covered when
``P_D >= T = gamma_th N0 - X``, where ``X`` is the summed reflected power;
coverage is the Laplace transform of ``max(0, T)`` at ``1/(K P r0^-alpha)``,
recovered from the transform of ``T`` by a principal-value inversion.
With the direct link blocked, coverage is ``P(X >= gamma_th N0)``, obtained
by Gil-Pelaez inversion of the characteristic function of ``X``.

Each RIS contributes ``I * h * u(phi)`` to ``X`` with ``h ~ Gamma(m,
Omega/m)``, ``u(phi) = P K M^2 (ell R)^-alpha`` and ``I`` a Bernoulli LoS
indicator with mean ``P_L(phi)``. The ``I = 0`` outcome keeps its
``1 - P_L`` probability mass in the transform, so ``X`` has an atom at zero.
RIS azimuths are either averaged uniformly over the wall
(``placement="uniform"``) or taken from the scene (``placement="fixed"``).
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import blockage_analytic as ba
from .channel import ChannelParams
from .errors import NonConvergenceError, PoleError
from .quadrature import (QuadSpec, adaptive_rule, find_min_count, integrate_finite,
                         integrate_semi_infinite_oscillatory)
from .scene import SceneConfig, equispaced_angles

PLACEMENTS = ("uniform", "fixed")

# The residue route is used only this far below the MGF pole (fraction of m/Omega).
_POLE_MARGIN = 0.5
_PHI_TOL = 1e-8

DEFAULT_QUAD = QuadSpec(abs_tol=1e-10, rel_tol=1e-10, max_evals=1_000_000,
                        tail_threshold=1e-10)


@dataclass(frozen=True)
class CoverageInputs:
    cfg: SceneConfig
    cp: ChannelParams
    gamma_th: float
    pl_of_phi: Optional[Callable] = None
    placement: str = "uniform"
    form: str = "marginal"
    quad: QuadSpec = DEFAULT_QUAD

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}")
        if not self.gamma_th >= 0:
            raise ValueError("gamma_th must be non-negative")

    @property
    def noise_threshold(self):
        """``gamma_th * N0`` in watts."""
        return self.gamma_th * self.cp.N0

    def at_r0(self, r0):
        return dataclasses.replace(self, cfg=dataclasses.replace(self.cfg, r0=float(r0)))


@dataclass(frozen=True)
class CoverageEstimate:
    value: float
    method: str = "analytic"
    half_width: float = 0.0

    def __post_init__(self):
        if not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"coverage {self.value} outside [0, 1]")
        if self.half_width < 0:
            raise ValueError("half_width must be non-negative")
        if self.method not in ("analytic", "montecarlo"):
            raise ValueError(f"unknown method {self.method!r}")


def _call_pl(fn, phi):
    try:
        out = np.asarray(fn(phi), dtype=float)
        if out.shape != phi.shape:
            out = np.broadcast_to(out, phi.shape).astype(float)
    except (TypeError, ValueError):
        out = np.array([float(fn(p)) for p in phi])
    return np.clip(out, 0.0, 1.0)


@functools.lru_cache(maxsize=8192)
def _phi_table(R, r0, RB, nB, form, pl_of_phi, alpha):
    """Angular nodes with weights, ``P_L`` and ``u/u_ref`` at each node.

    Panels adapt to the kinks of ``P_L``; the built-in ``P_L`` and ``u`` are
    mirror-symmetric so half the circle suffices, while a custom ``P_L``
    gets the full circle. ``u/u_ref`` depends on the link budget only
    through ``alpha``.
    """
    hi = math.pi if pl_of_phi is None else 2 * math.pi
    lref = R - r0

    def pl(t):
        if pl_of_phi is not None:
            return _call_pl(pl_of_phi, t)
        return np.asarray(ba.los_probability(t, r0, R, RB, nB, form))

    def moments(t):
        p = pl(t)
        u = (np.asarray(ba.ell(r0, t, R)) / lref) ** (-alpha)
        return np.stack([p, p * u, u])

    spec = QuadSpec(abs_tol=_PHI_TOL * hi, rel_tol=1e-12, max_evals=400_000)
    try:
        _, w, y = adaptive_rule(moments, 0.0, hi, spec)
    except NonConvergenceError as exc:
        raise NonConvergenceError(f"angular quadrature: {exc}")
    for arr in (w, y):
        arr.setflags(write=False)
    return w / hi, y[0], y[2]


class ReflectedPower:
    """Distribution of the summed reflected power ``X`` at one user distance.

    Transform arguments are scaled by ``u_ref`` (the strongest per-RIS mean
    power), so ``mgf(z)`` evaluates ``E[exp(z X / u_ref)]``.
    """

    def __init__(self, inp: CoverageInputs):
        cfg, cp = inp.cfg, inp.cp
        self.n_R = cfg.n_R
        self.shape = cp.m_nak
        self.spread = cp.omega
        self.placement = inp.placement
        self.u_ref = float(cp.reflected_mean_power(cfg.r0, 0.0, cfg.R))

        if inp.placement == "fixed":
            phi = np.asarray(cfg.ris_angles, dtype=float)
            self.weights = None
            if phi.size:
                if inp.pl_of_phi is not None:
                    self.pl = _call_pl(inp.pl_of_phi, phi)
                else:
                    self.pl = np.asarray(ba.los_probability(phi, cfg.r0, cfg.R, cfg.RB, cfg.nB, inp.form))
                self.u = np.atleast_1d(np.asarray(cp.reflected_mean_power(cfg.r0, phi, cfg.R))) / self.u_ref
            else:
                self.pl = self.u = phi
        else:
            self.weights, self.pl, self.u = _phi_table(
                cfg.R, cfg.r0, cfg.RB, cfg.nB, inp.form, inp.pl_of_phi, cp.alpha)
        self.p0 = float(self.mgf_atom())

    def mgf_atom(self):
        if self.n_R == 0:
            return 1.0
        if self.weights is None:
            return np.prod(1.0 - self.pl)
        return np.dot(self.weights, 1.0 - self.pl) ** self.n_R

    def pole(self):
        """Largest real scaled argument for which the MGF exists."""
        if self.n_R == 0:
            return math.inf
        return self.shape / (self.spread * float(np.max(self.u)))

    def _factors(self, z):
        """Per-RIS atom ``A`` and continuous part ``B(z)`` of the MGF factor."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        base = 1.0 - z[:, None] * self.u[None, :] * (self.spread / self.shape)
        if float(self.shape).is_integer():
            g = np.reciprocal(base) ** int(self.shape)
        else:
            g = base ** (-self.shape)
        cont = self.pl[None, :] * g
        if self.weights is None:
            return 1.0 - self.pl, cont
        return np.array([np.dot(self.weights, 1.0 - self.pl)]), cont @ self.weights

    def mgf(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.n_R == 0:
            return np.ones_like(z)
        atom, cont = self._factors(z)
        if self.weights is None:
            return np.prod(atom[None, :] + cont, axis=1)
        return (atom[0] + cont) ** self.n_R

    def continuous(self, z):
        """``mgf(z) - p0``: the transform with the atom at zero removed.

        Expanded factor by factor so that no cancellation occurs when the
        continuous part is tiny next to the atom.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.n_R == 0:
            return np.zeros_like(z)
        atom, cont = self._factors(z)
        if self.weights is None:
            pairs = [(atom[i], cont[:, i]) for i in range(self.n_R)]
        else:
            pairs = [(atom[0], cont)] * self.n_R
        a_prod = 1.0
        c_prod = np.zeros_like(z)
        for a, b in pairs:
            c_prod = c_prod * (a + b) + a_prod * b
            a_prod = a_prod * a
        return c_prod


def laplace_T(s, inp: CoverageInputs, model: ReflectedPower = None):
    """Laplace transform ``E[exp(-s T)]`` of ``T = gamma_th N0 - X``."""
    model = model or ReflectedPower(inp)
    s = complex(s)
    z = s * model.u_ref
    if z.real >= model.pole():
        raise PoleError(f"laplace_T: Re(s) u Omega/m = {z.real / model.pole():.3g} >= 1")
    return complex(np.exp(-inp.noise_threshold * s) * model.mgf(z)[0])


def _check_prob(value, hi, where):
    if value < -1e-4 or value > hi + 1e-4:
        raise NonConvergenceError(f"{where}: inversion gave {value:.6g}, outside [0, {hi:.6g}]")
    return min(max(value, 0.0), hi)


def _decay_width(model):
    return 0.25 * model.shape / model.spread


def laplace_T_plus(s, inp: CoverageInputs, model: ReflectedPower = None):
    """``E[exp(-s max(0, T))]`` by principal-value inversion of ``laplace_T``.

    The integral over the imaginary axis is folded onto ``w > 0`` using
    conjugate symmetry, and the atom of ``X`` at zero is integrated in closed
    form so the remaining integrand decays.
    """
    if not s > 0:
        raise ValueError("laplace_T_plus needs s > 0")
    model = model or ReflectedPower(inp)
    z0 = s * model.u_ref
    if z0 >= model.pole():
        raise PoleError(f"laplace_T_plus: s u Omega/m = {z0 / model.pole():.3g} >= 1")
    c = inp.noise_threshold
    ct = c / model.u_ref
    damp = math.exp(-s * c)
    b_s = damp * model.mgf(z0)[0].real
    p0 = model.p0

    def f(w):
        rot = np.exp(1j * w * ct)
        t1 = damp * rot * model.continuous(z0 - 1j * w)
        t2 = rot * model.continuous(-1j * w)
        return np.imag(t1 - t2) / w

    integral = 0.0
    if model.n_R and p0 < 1.0:
        integral, _ = integrate_semi_infinite_oscillatory(
            f, inp.quad, width=_decay_width(model), freq=ct if ct > 0 else None)
    value = 0.5 * (1.0 + b_s) + 0.5 * p0 * (damp - 1.0) + integral / math.pi
    return _check_prob(value, 1.0, "laplace_T_plus")


def char_fn_indirect(t, inp: CoverageInputs, model: ReflectedPower = None):
    """Characteristic function ``E[exp(i t X)]`` (``t`` in 1/W)."""
    model = model or ReflectedPower(inp)
    t = np.asarray(t, dtype=float)
    out = model.mgf(1j * t.ravel() * model.u_ref).reshape(t.shape)
    return complex(out) if out.ndim == 0 else out


def coverage_direct_only(r0, cp: ChannelParams, gamma_th):
    """Coverage with only the (LoS, Rayleigh) direct link."""
    return math.exp(-gamma_th * cp.N0 / float(cp.direct_mean_power(r0)))


def _gil_pelaez_tail(model, ct, quad, direct=None):
    """``P(X + D >= c)`` restricted to the continuous part of ``X``.

    ``D`` is an optional exponential direct term with scaled mean ``direct``.
    """
    if direct is None:
        def f(w):
            return np.imag(np.exp(-1j * w * ct) * model.continuous(1j * w)) / w
    else:
        def f(w):
            cf = model.continuous(1j * w) / (1.0 - 1j * w * direct)
            return np.imag(np.exp(-1j * w * ct) * cf) / w
    integral, _ = integrate_semi_infinite_oscillatory(
        f, quad, width=_decay_width(model), freq=ct if ct > 0 else None)
    return 0.5 * (1.0 - model.p0) + integral / math.pi


def coverage_direct_nlos(inp: CoverageInputs, model: ReflectedPower = None):
    """``P(X >= gamma_th N0)``: coverage through the RISs alone."""
    model = model or ReflectedPower(inp)
    p0 = model.p0
    if p0 > 1.0 - 1e-9:
        return 0.0
    c = inp.noise_threshold
    if c <= 0:
        return 1.0
    value = _gil_pelaez_tail(model, c / model.u_ref, inp.quad)
    if value > 1.0 - p0 + 1e-3 or value < -1e-3:
        raise NonConvergenceError(f"coverage_direct_nlos: {value:.6g} outside [0, 1 - p0]")
    return min(max(value, 0.0), 1.0 - p0)


def coverage_direct_los(inp: CoverageInputs, model: ReflectedPower = None, method="auto"):
    """Coverage with the direct link in LoS.

    ``method="laplace"`` evaluates the positive-part transform at
    ``1/(K P r0^-alpha)``; this needs the MGF of ``X`` to exist there.
    ``method="gil-pelaez"`` inverts the characteristic function of the
    total power instead and has no such restriction. ``"auto"`` takes the
    transform route when comfortably inside the pole.
    """
    model = model or ReflectedPower(inp)
    d = float(inp.cp.direct_mean_power(inp.cfg.r0))
    s = 1.0 / d
    if method == "auto":
        method = "laplace" if s * model.u_ref <= _POLE_MARGIN * model.pole() else "gil-pelaez"
    if method == "laplace":
        return laplace_T_plus(s, inp, model)
    if method != "gil-pelaez":
        raise ValueError(f"unknown method {method!r}")
    c = inp.noise_threshold
    if c <= 0:
        return 1.0
    atom = model.p0 * math.exp(-c / d)
    if model.p0 >= 1.0:
        return atom
    value = atom + _gil_pelaez_tail(model, c / model.u_ref, inp.quad, direct=d / model.u_ref)
    return _check_prob(value, 1.0, "coverage_direct_los")


def _saddle(model, ct, direct):
    """Contour abscissa near the minimum of ``|e^{s c} C(-s) / (s (1 + s d))|``."""
    sig = np.logspace(-4, 7, 111) / max(ct, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        cval = model.continuous(-sig).real
        h = sig * ct + np.log(cval) - np.log(sig)
        if direct is not None:
            h = h - np.log1p(sig * direct)
    h = np.where(np.isfinite(h) & (cval > 0), h, np.inf)
    k = int(np.argmin(h))
    if not np.isfinite(h[k]):
        raise NonConvergenceError("lower tail: no admissible contour abscissa")
    return float(sig[k]), float(h[k])


def lower_tail(model, ct, quad=DEFAULT_QUAD, direct=None):
    """``P(X + D < c)`` with relative accuracy, even far below 1e-16.

    ``ct`` and ``direct`` (the exponential mean of ``D``; omitted for
    ``D = 0``) are in units of ``u_ref``. The Bromwich contour for the CDF
    is moved to a real abscissa near the saddle point, where the integrand
    has the size of the answer; the atom of ``X`` is inverted in closed form.
    """
    if ct <= 0:
        return 0.0
    atom = model.p0 * (1.0 if direct is None else -math.expm1(-ct / direct))
    if model.n_R == 0 or model.p0 >= 1.0:
        return atom
    sigma, log_scale = _saddle(model, ct, direct)

    def f(w):
        sv = sigma + 1j * w
        val = np.exp(sv * ct - log_scale) * model.continuous(-sv) / sv
        if direct is not None:
            val = val / (1.0 + sv * direct)
        return np.real(val) / math.pi

    width = 0.25 * (model.shape / model.spread + sigma)
    integral, _ = integrate_semi_infinite_oscillatory(f, quad, width=width, freq=ct)
    if integral < -1e-6:
        raise NonConvergenceError(f"lower tail: negative continuous mass {integral:.3g}")
    value = atom + max(integral, 0.0) * math.exp(log_scale)
    return min(value, 1.0)


def outage_at(r0, inp: CoverageInputs):
    """``1 - coverage_at(r0)`` evaluated directly from the lower tails."""
    local = inp.at_r0(r0)
    model = ReflectedPower(local)
    cfg = local.cfg
    ct = local.noise_threshold / model.u_ref
    if ct <= 0:
        return 0.0
    q_b = float(ba.q_direct(r0, cfg.R, cfg.RB, cfg.nB))
    d = float(local.cp.direct_mean_power(r0)) / model.u_ref
    out = (1.0 - q_b) * lower_tail(model, ct, local.quad, direct=d)
    if q_b > 0:
        out += q_b * lower_tail(model, ct, local.quad)
    return out


def coverage_terms(r0, inp: CoverageInputs):
    """``(P_c1, P_c2, q_B)`` at user distance ``r0``."""
    local = inp.at_r0(r0)
    model = ReflectedPower(local)
    cfg = local.cfg
    q_b = float(ba.q_direct(r0, cfg.R, cfg.RB, cfg.nB))
    pc1 = coverage_direct_los(local, model)
    pc2 = coverage_direct_nlos(local, model) if q_b > 0 else 0.0
    return pc1, pc2, q_b


def coverage_at(r0, inp: CoverageInputs):
    pc1, pc2, q_b = coverage_terms(r0, inp)
    return pc1 * (1.0 - q_b) + pc2 * q_b


def outage(x):
    return 1.0 - x


@functools.lru_cache(maxsize=512)
def outage_avg(inp: CoverageInputs):
    """Outage averaged over a user distance uniform on ``[RB, R - RB]``.

    Integrates ``outage_at`` under a purely relative tolerance, so tiny
    outages keep their significant digits.
    """
    cfg = inp.cfg
    lo, hi = cfg.RB, cfg.R - cfg.RB

    def out_at(r):
        return np.array([outage_at(x, inp) for x in np.atleast_1d(r)])

    spec = QuadSpec(abs_tol=1e-300, rel_tol=1e-6, max_evals=20_000)
    value, _ = integrate_finite(out_at, lo, hi, spec)
    return min(max(value / (hi - lo), 0.0), 1.0)


def coverage_avg(inp: CoverageInputs):
    """Coverage averaged over a user distance uniform on ``[RB, R - RB]``."""
    return 1.0 - outage_avg(inp)


@dataclass(frozen=True)
class MinRisResult:
    n_R: Optional[int]
    outage: Optional[float]
    outage_previous: Optional[float]
    nB: int
    zero_ris_suffices: bool = False


def with_ris_count(inp: CoverageInputs, n_R, nB=None):
    cfg = dataclasses.replace(inp.cfg, ris_angles=equispaced_angles(n_R),
                              nB=inp.cfg.nB if nB is None else int(nB))
    return dataclasses.replace(inp, cfg=cfg)


def min_ris_search(lambda_B, target, base: CoverageInputs, n_max):
    """Smallest equispaced RIS count meeting ``outage <= target``."""
    if not 0 < target < 1:
        raise ValueError("target outage must lie in (0, 1)")
    cfg = base.cfg
    nB = int(round(lambda_B * math.pi * cfg.R ** 2))
    outages = {}

    def out(n):
        if n not in outages:
            outages[n] = float(outage_avg(with_ris_count(base, n, nB)))
        return outages[n]

    n = find_min_count(lambda k: out(k) <= target, n_max)
    if n is None:
        return MinRisResult(None, None, out(n_max), nB)
    prev = out(n - 1) if n > 1 else None
    if n > 1 and prev <= target:
        raise AssertionError("min_ris_search: predicate held below the returned count")
    zero = bool(n == 1 and out(0) <= target)
    return MinRisResult(n, out(n), prev, nB, zero)


def min_ris_required(lambda_B, target, base: CoverageInputs, n_max):
    return min_ris_search(lambda_B, target, base, n_max).n_R
