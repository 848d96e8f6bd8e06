"""Scene geometry: configuration, blockage sampling and exact line-of-sight tests.

The BS sits at the origin, the user at ``(r0, 0)`` and RIS ``i`` on the wall
at ``(R cos phi_i, R sin phi_i)``. Blockages are disks of radius ``RB`` whose
centres are drawn i.i.d. inside the room.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

RADIAL_LAWS = ("area", "radius")


@dataclass(frozen=True)
class SceneConfig:
    """Circular warehouse with a BS at the centre.

    ``radial_law`` selects how blockage centres are placed: ``"area"`` is a
    binomial point process (uniform over the annulus ``RB <= r <= R - RB``),
    ``"radius"`` draws the radial distance itself uniformly on that range.
    """

    R: float
    r0: float
    RB: float
    nB: int
    ris_angles: tuple = ()
    rng_seed: int = 0
    radial_law: str = "area"

    def __post_init__(self):
        object.__setattr__(self, "ris_angles", tuple(float(a) for a in self.ris_angles))
        if not self.R > 0:
            raise ValueError(f"SceneConfig: R must be positive, got {self.R}")
        if not 0 < self.RB < self.R / 2:
            raise ValueError(f"SceneConfig: need 0 < RB < R/2, got RB={self.RB}, R={self.R}")
        if not 0 < self.r0 <= self.R - self.RB:
            raise ValueError(f"SceneConfig: need 0 < r0 <= R - RB, got r0={self.r0}")
        if self.nB < 0 or int(self.nB) != self.nB:
            raise ValueError(f"SceneConfig: nB must be a non-negative integer, got {self.nB}")
        object.__setattr__(self, "nB", int(self.nB))
        for a in self.ris_angles:
            if not 0 <= a < TWO_PI:
                raise ValueError(f"SceneConfig: RIS angle {a} outside [0, 2pi)")
        if self.radial_law not in RADIAL_LAWS:
            raise ValueError(f"SceneConfig: radial_law must be one of {RADIAL_LAWS}")
        if self.rng_seed < 0:
            raise ValueError("SceneConfig: rng_seed must be unsigned")

    @property
    def n_R(self):
        return len(self.ris_angles)

    def check_user_distance(self):
        """Enforce ``r0 >= 2 RB`` (the user is not hugging the BS)."""
        if self.r0 < 2 * self.RB:
            raise ValueError(f"SceneConfig: need r0 >= 2*RB, got r0={self.r0}, RB={self.RB}")

    def ris_points(self):
        a = np.asarray(self.ris_angles, dtype=float)
        return np.stack([self.R * np.cos(a), self.R * np.sin(a)], axis=-1).reshape(-1, 2)


@dataclass(frozen=True)
class BlockageDisk:
    r: float
    theta: float

    @property
    def center(self):
        return np.array([self.r * math.cos(self.theta), self.r * math.sin(self.theta)])


@dataclass
class LinkVisibility:
    direct_los: bool
    indirect_los: list = field(default_factory=list)


def equispaced_angles(n_R):
    """RIS azimuths ``2 pi (i - 1)/n_R + pi/n_R`` for ``i = 1..n_R``."""
    return tuple((TWO_PI * i / n_R + math.pi / n_R) % TWO_PI for i in range(n_R))


def substream(seed, *key):
    """Counter-based (Philox) generator addressed by ``(seed, *key)``.

    Streams for distinct keys are independent and each is reproducible in
    isolation, so work can be split across workers in any order.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample_radii(cfg, stream, size):
    lo, hi = cfg.RB, cfg.R - cfg.RB
    u = stream.random(size)
    if cfg.radial_law == "radius":
        return lo + (hi - lo) * u
    return np.sqrt(lo * lo + (hi * hi - lo * lo) * u)


def sample_centers(cfg, stream, n_trials):
    """Blockage centres for ``n_trials`` scenes, shape ``(n_trials, nB, 2)``."""
    r = sample_radii(cfg, stream, (n_trials, cfg.nB))
    th = stream.random((n_trials, cfg.nB)) * TWO_PI
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def sample_blockages(cfg, stream):
    r = sample_radii(cfg, stream, cfg.nB)
    th = stream.random(cfg.nB) * TWO_PI
    return [BlockageDisk(float(a), float(b)) for a, b in zip(r, th)]


def point_segment_distance(p, a, b):
    """Distance from points ``p`` to segments ``a``-``b`` (broadcasting over
    leading axes, last axis holds x/y)."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    dd = np.sum(d * d, axis=-1)
    t = np.sum((p - a) * d, axis=-1) / np.where(dd > 0, dd, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[..., None] * d
    return np.sqrt(np.sum((p - closest) ** 2, axis=-1))


def segment_blocked(a, b, disk, RB):
    """True iff the disk of radius ``RB`` at ``disk`` comes strictly closer
    than ``RB`` to segment ``ab`` (tangency is line-of-sight)."""
    center = disk.center if isinstance(disk, BlockageDisk) else np.asarray(disk, dtype=float)
    return bool(point_segment_distance(center, a, b) < RB)


def segments_blocked(a, b, centers, RB):
    """Vectorised blocking test: any of ``centers[..., k, :]`` blocks ``a``-``b``.

    ``a`` and ``b`` broadcast against ``centers[..., 0, :]``.
    """
    a = np.asarray(a, dtype=float)[..., None, :]
    b = np.asarray(b, dtype=float)[..., None, :]
    if centers.shape[-2] == 0:
        return np.zeros(np.broadcast_shapes(a.shape[:-2], centers.shape[:-2]), dtype=bool)
    return np.any(point_segment_distance(centers, a, b) < RB, axis=-1)


def visibility(cfg, blockages):
    centers = np.array([d.center for d in blockages]).reshape(-1, 2)
    user = np.array([cfg.r0, 0.0])
    bs = np.zeros(2)
    direct = not segments_blocked(bs, user, centers, cfg.RB)
    indirect = []
    for z in cfg.ris_points():
        blocked = segments_blocked(bs, z, centers, cfg.RB) or segments_blocked(z, user, centers, cfg.RB)
        indirect.append(not bool(blocked))
    return LinkVisibility(bool(direct), indirect)
