"""Closed-form blocking probabilities.

Single blockage: a disk at ``r∠theta`` shadows an arc of the wall as seen
from the user (length L1) and from the BS (length L01); a RIS placed
uniformly on the wall is cut off when it lands in either arc.

Many blockages: for a RIS at a fixed angle, a sub-link is blocked when some
blockage centre falls inside the width-``2 RB`` rectangle around it. The
rectangle is clipped to the room; the joint BS-RIS / RIS-user region is the
kite where the two rectangles cross at the RIS.

All array-valued helpers broadcast over their inputs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
_ARG_TOL = 1e-12
_WARN_TOL = 1e-6


@dataclass(frozen=True)
class ArcLengths:
    L1: float
    L01: float
    Lcap: float


@dataclass(frozen=True)
class CascadeBlockProbs:
    p_ris_user: float
    p_bs_ris: float
    p_cascade: float


def _asin(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + _ARG_TOL):
        raise GeometryError(f"arcsin argument outside [-1, 1]: max |x| = {np.max(np.abs(x))}")
    return np.arcsin(np.clip(x, -1.0, 1.0))


def _reduce_angle(a):
    """Map angles to [0, pi] using the mirror symmetry about the x-axis."""
    a = np.mod(np.asarray(a, dtype=float), TWO_PI)
    return np.where(a > math.pi, TWO_PI - a, a)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


# --- single blockage, uniformly placed RIS ---------------------------------

def _user_shadow(r, theta, r0, R, RB):
    """Pieces of the user-side shadow: (L1, zeta2, full_shadow)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ex = r * np.cos(theta)
    ey = r * np.sin(theta)
    x = np.hypot(ey, r0 - ex)
    # strict: a user exactly on the disk edge still sees a half-plane
    full = x < RB
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(full, 1.0, RB / np.where(x > 0, x, 1.0))
    chi = 2.0 * _asin(np.minimum(ratio, 1.0))
    # two-argument form: angle at the user measured from the user->BS ray
    gamma = np.arctan2(ey, r0 - ex)
    g1 = gamma - chi / 2
    g2 = gamma + chi / 2
    s1 = _asin(r0 * np.sin(g1) / R)
    s2 = _asin(r0 * np.sin(g2) / R)
    L1 = np.where(full, TWO_PI * R, R * (s2 - s1 + chi))
    zeta2 = math.pi - s2 - g2
    return L1, zeta2, full


def _bs_shadow(r, R, RB):
    r = np.asarray(r, dtype=float)
    if np.any(r < RB * (1 - _ARG_TOL)):
        raise GeometryError("blockage centre closer to the BS than RB")
    chi2 = 2.0 * _asin(np.minimum(RB / r, 1.0))
    return R * chi2, chi2


def arc_lengths(r, theta, r0, R, RB):
    """Vectorised (L1, L01, Lcap) for blockages at ``r∠theta``."""
    theta = _reduce_angle(theta)
    L1, zeta2, full = _user_shadow(r, theta, r0, R, RB)
    L01, chi2 = _bs_shadow(r, R, RB)
    psi = theta + chi2 / 2
    Lcap = np.where(zeta2 >= psi, 0.0, R * (psi - zeta2))
    Lcap = np.clip(Lcap, 0.0, np.minimum(L1, L01))
    Lcap = np.where(full, L01, Lcap)
    L1 = np.clip(L1, 0.0, TWO_PI * R)
    return L1, L01, Lcap


def arc_L1(blockage, r0, R, RB):
    L1, _, _ = _user_shadow(blockage.r, _reduce_angle(blockage.theta), r0, R, RB)
    return float(np.clip(L1, 0.0, TWO_PI * R))


def arc_L01(blockage, R, RB):
    L01, _ = _bs_shadow(blockage.r, R, RB)
    return float(L01)


def arc_Lcap(blockage, r0, R, RB):
    return float(arc_lengths(blockage.r, blockage.theta, r0, R, RB)[2])


def single_blockage_probs(blockage, r0, R, RB):
    L1, L01, Lcap = arc_lengths(blockage.r, blockage.theta, r0, R, RB)
    c = TWO_PI * R
    return CascadeBlockProbs(
        p_ris_user=float(np.clip(L1 / c, 0, 1)),
        p_bs_ris=float(np.clip(L01 / c, 0, 1)),
        p_cascade=float(np.clip((L1 + L01 - Lcap) / c, 0, 1)),
    )


def multi_ris_single_blockage(blockage, r0, ris_angles, R, RB):
    """Probability that every cascade is cut by one blockage, each RIS
    being independently uniform on the wall (``ris_angles`` sets the count)."""
    n = len(ris_angles)
    if n == 0:
        raise ValueError("need at least one RIS")
    return single_blockage_probs(blockage, r0, R, RB).p_cascade ** n


# --- many blockages, RIS at a fixed angle ----------------------------------

def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _dot(u, v):
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]


def _edge_disk_area(p, q, R):
    """Signed area of triangle (O, p, q) intersected with the disk |x| <= R."""
    d = q - p
    A = _dot(d, d)
    B = _dot(p, d)
    C = _dot(p, p) - R * R
    disc = B * B - A * C
    hit = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(hit, disc, 0.0))
    A_safe = np.where(A > 0, A, 1.0)
    t1 = np.where(hit, np.clip((-B - sq) / A_safe, 0.0, 1.0), 0.0)
    t2 = np.where(hit, np.clip((-B + sq) / A_safe, 0.0, 1.0), 0.0)
    a = p + t1[..., None] * d
    b = p + t2[..., None] * d

    def sector(u, v):
        return 0.5 * R * R * np.arctan2(_cross(u, v), _dot(u, v))

    return sector(p, a) + 0.5 * _cross(a, b) + sector(b, q)


def polygon_disk_area(vertices, R):
    """Area of a simple polygon (vertices along axis -2) inside |x| <= R."""
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=-2)
    total = np.sum(_edge_disk_area(v, w, R), axis=-1)
    return np.abs(total)


def _rect_corners(px, py, fx, fy, RB):
    dx = fx - px
    dy = fy - py
    length = np.hypot(dx, dy)
    nx = -dy / length * RB
    ny = dx / length * RB
    corners = np.stack([
        np.stack([px + nx, py + ny], -1),
        np.stack([fx + nx, fy + ny], -1),
        np.stack([fx - nx, fy - ny], -1),
        np.stack([px - nx, py - ny], -1),
    ], axis=-2)
    return corners, length


def ell(r0, phi, R):
    """User-to-RIS distance for a RIS at azimuth ``phi``."""
    phi = np.asarray(phi, dtype=float)
    return _scalar(np.sqrt((R * np.cos(phi) - r0) ** 2 + (R * np.sin(phi)) ** 2))


def area_abgfd(phi, r0, R, RB):
    """Area of the user-RIS blocking rectangle (width ``2 RB``) lying inside
    the room. With ``r0 = 0`` this is the BS-RIS rectangle."""
    phi = _reduce_angle(phi)
    r0 = np.asarray(r0, dtype=float)
    fx = R * np.cos(phi)
    fy = R * np.sin(phi)
    px, fx, fy = np.broadcast_arrays(r0, fx, fy)
    corners, length = _rect_corners(px, np.zeros_like(px), fx, fy, RB)
    area = polygon_disk_area(corners, R)
    return _scalar(np.clip(area, 0.0, 2 * RB * length))


def _void_block(area, R, nB):
    frac = np.clip(np.asarray(area) / (math.pi * R * R), 0.0, 1.0)
    return 1.0 - (1.0 - frac) ** nB


def ris_user_block_prob(phi, r0, R, RB, nB):
    return _scalar(_void_block(area_abgfd(phi, r0, R, RB), R, nB))


def q_ris_user(phi, cfg):
    return ris_user_block_prob(phi, cfg.r0, cfg.R, cfg.RB, cfg.nB)


def q_bs_ris(phi, cfg):
    return ris_user_block_prob(phi, 0.0, cfg.R, cfg.RB, cfg.nB)


def q_direct(r0, R, RB, nB):
    """Direct-link blocking probability ``1 - (1 - 2 r0 RB/(pi R^2))^nB``."""
    r0 = np.asarray(r0, dtype=float)
    return _scalar(_void_block(2.0 * r0 * RB, R, nB))


def kite_area(phi, r0, R, RB):
    """Overlap of the BS-RIS and RIS-user rectangles near the RIS.

    Capped at the smaller clipped rectangle, which also covers the
    collinear geometry where the closed form diverges.
    """
    phi = _reduce_angle(phi)
    r0 = np.asarray(r0, dtype=float)
    zeta = np.arctan2(R * np.sin(phi), R * np.cos(phi) - r0) - phi
    cap = np.minimum(area_abgfd(phi, r0, R, RB), area_abgfd(phi, 0.0, R, RB))
    degenerate = np.abs(zeta) < 1e-9
    if np.any(degenerate):
        log.debug("kite_area: RIS, BS and user collinear at %d point(s)", int(np.sum(degenerate)))
    with np.errstate(divide="ignore"):
        k = RB * RB / np.tan(np.where(degenerate, 1.0, zeta) / 2)
    k = np.where(degenerate, cap, k)
    return _scalar(np.clip(k, 0.0, cap))


def cascade_block_prob(phi, r0, R, RB, nB, form="marginal"):
    """Probability the BS-RIS-user cascade at azimuth ``phi`` is blocked.

    ``form="marginal"`` combines the two marginals with the kite term as
    ``q_ru + q_br - 1 + (1 - A_kite/(pi R^2))^nB``; ``form="void"`` uses the
    void probability of the union region, identical for ``nB = 1``.
    Both are clamped to the Bonferroni bounds.
    """
    a_ru = area_abgfd(phi, r0, R, RB)
    a_br = area_abgfd(phi, 0.0, R, RB)
    a_k = kite_area(phi, r0, R, RB)
    q_ru = _void_block(a_ru, R, nB)
    q_br = _void_block(a_br, R, nB)
    if form == "marginal":
        kite_free = (1.0 - np.clip(a_k / (math.pi * R * R), 0, 1)) ** nB
        q = q_ru + q_br - 1.0 + kite_free
    elif form == "void":
        q = _void_block(a_ru + a_br - a_k, R, nB)
    else:
        raise ValueError(f"unknown form {form!r}")
    lo = np.maximum(q_ru, q_br)
    hi = np.minimum(1.0, q_ru + q_br)
    excess = np.maximum(lo - q, q - hi)
    if np.any(excess > _WARN_TOL):
        log.debug("cascade_block_prob: clamped by up to %.3g", float(np.max(excess)))
    return _scalar(np.clip(q, lo, hi))


def q_cascade(phi, cfg, form="marginal"):
    return cascade_block_prob(phi, cfg.r0, cfg.R, cfg.RB, cfg.nB, form)


def q_all_cascades(cfg, form="marginal"):
    """Probability that every cascade is blocked, RISs treated independently."""
    if cfg.n_R == 0:
        raise ValueError("need at least one RIS")
    q = cascade_block_prob(np.asarray(cfg.ris_angles), cfg.r0, cfg.R, cfg.RB, cfg.nB, form)
    return float(np.prod(q))


def los_probability(phi, r0, R, RB, nB, form="marginal"):
    """Cascade line-of-sight probability ``1 - q_cascade``."""
    return _scalar(1.0 - np.asarray(cascade_block_prob(phi, r0, R, RB, nB, form)))
