"""Radio quantities: path loss, fading, received power and the SNR threshold."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blockage_analytic import ell

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def path_loss_constant(fc):
    """Free-space constant ``(c / (4 pi fc))^2``."""
    return (SPEED_OF_LIGHT / (4.0 * math.pi * fc)) ** 2


@dataclass(frozen=True)
class ChannelParams:
    """Link budget in SI units. ``P`` is the transmit power in W; the
    antenna gain (linear) multiplies it in every received-power formula."""

    P: float
    K: float
    alpha: float
    M: int = 64
    m_nak: float = 3.0
    omega: float = 1.0
    N0: float = 1.0
    antenna_gain: float = 1.0

    def __post_init__(self):
        for name in ("P", "K", "alpha", "M", "omega", "N0", "antenna_gain"):
            if not getattr(self, name) > 0:
                raise ValueError(f"ChannelParams: {name} must be positive")
        if self.m_nak < 0.5:
            raise ValueError("ChannelParams: Nakagami shape m_nak must be >= 0.5")

    @property
    def p_eff(self):
        return self.P * self.antenna_gain

    @classmethod
    def from_db(cls, P_dBm, fc_Hz, bandwidth_Hz, N0_dBm_per_Hz, alpha,
                antenna_gain_dBi=0.0, M=64, m_nak=3.0, omega=1.0):
        return cls(
            P=dbm_to_watt(P_dBm),
            K=path_loss_constant(fc_Hz),
            alpha=alpha,
            M=M,
            m_nak=m_nak,
            omega=omega,
            N0=dbm_to_watt(N0_dBm_per_Hz) * bandwidth_Hz,
            antenna_gain=db_to_linear(antenna_gain_dBi),
        )

    def direct_mean_power(self, r0):
        return self.p_eff * self.K * np.asarray(r0, dtype=float) ** (-self.alpha)

    def reflected_mean_power(self, r0, phi, R):
        """Per-RIS received power before fading: ``P K M^2 (ell R)^-alpha``."""
        return self.p_eff * self.K * self.M ** 2 * (ell(r0, phi, R) * R) ** (-self.alpha)


@dataclass(frozen=True)
class QosTarget:
    b: float
    beta: float = 1.0
    T: float = 1e-3
    W: float = 1e6

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("QosTarget: data size b must be non-negative")
        if not 0 < self.beta <= 1:
            raise ValueError("QosTarget: beta must lie in (0, 1]")
        if not self.T * self.W > 0:
            raise ValueError("QosTarget: T*W must be positive")


def gamma_threshold(q):
    """SNR threshold ``2^(b / (beta T W))``."""
    x = q.b / (q.beta * q.T * q.W)
    if x > 1000:
        raise OverflowError(f"gamma_threshold: exponent {x:.4g} exceeds 1000")
    return 2.0 ** x


def draw_direct_fading(stream, size=None):
    """Rayleigh power gain, Exp(1)."""
    return stream.exponential(1.0, size)


def draw_indirect_fading(stream, m_nak, omega, size=None):
    """Nakagami-m power gain, Gamma(m, omega/m)."""
    return stream.gamma(m_nak, omega / m_nak, size)


def received_power(vis, h_d, h_i, cp, cfg):
    h_i = list(h_i)
    if len(h_i) != cfg.n_R or len(vis.indirect_los) != cfg.n_R:
        raise ValueError("received_power: one fading gain and one indicator per RIS")
    total = float(vis.direct_los) * float(cp.direct_mean_power(cfg.r0)) * h_d
    for on, h, phi in zip(vis.indirect_los, h_i, cfg.ris_angles):
        if on:
            total += float(cp.reflected_mean_power(cfg.r0, phi, cfg.R)) * h
    return total
