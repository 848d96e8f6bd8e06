"""Monte Carlo ground truth for blocking and SNR coverage.

Trials are processed in fixed-size chunks; chunk ``k`` of sweep point ``p``
draws from the Philox stream addressed by ``(seed, p, k)``. Results
therefore do not depend on how chunks are spread over workers.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import blockage_analytic as ba
from .channel import ChannelParams, draw_direct_fading, draw_indirect_fading
from .coverage import CoverageEstimate
from .scene import (TWO_PI, SceneConfig, equispaced_angles, sample_centers, segments_blocked,
                    substream)

CORRELATION_MODELS = ("exact_geometric", "intra_ris_correlated", "independent")
USER_LAWS = ("fixed", "uniform")
RIS_LAWS = ("fixed", "uniform")
CHUNK = 4096
Z99 = NormalDist().inv_cdf(0.995)


def binomial_half_width(p, n):
    """99% normal-approximation half-width; ``3/n`` when ``p`` is 0 or 1."""
    if p <= 0.0 or p >= 1.0:
        return 3.0 / n
    return Z99 * math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class SimSpec:
    """One simulation point.

    ``user_law="uniform"`` redraws the user distance on ``[RB, R - RB]`` per
    trial (ignoring ``cfg.r0``); ``ris_law="uniform"`` redraws every RIS
    azimuth per trial. ``point`` addresses the random stream of a sweep point.
    """

    cfg: SceneConfig
    cp: ChannelParams
    gamma_th: float
    n_trials: int = 100_000
    correlation_model: str = "exact_geometric"
    seed: int = 0
    user_law: str = "fixed"
    ris_law: str = "fixed"
    form: str = "marginal"
    point: int = 0

    def __post_init__(self):
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise ValueError("SimSpec: n_trials must be a positive integer")
        if self.correlation_model not in CORRELATION_MODELS:
            raise ValueError(f"SimSpec: correlation_model must be one of {CORRELATION_MODELS}")
        if self.user_law not in USER_LAWS or self.ris_law not in RIS_LAWS:
            raise ValueError("SimSpec: unknown user_law or ris_law")
        if self.seed < 0 or self.point < 0:
            raise ValueError("SimSpec: seed and point must be unsigned")
        if not self.gamma_th >= 0:
            raise ValueError("SimSpec: gamma_th must be non-negative")


@dataclass(frozen=True)
class LinkStats:
    """Empirical blocking frequencies; per-RIS entries are tuples."""

    trials: int
    direct: float
    ris_user: tuple
    bs_ris: tuple
    cascade: tuple
    all_cascades: float

    def half_width(self, p):
        return binomial_half_width(p, self.trials)


@dataclass(frozen=True)
class SimResult:
    coverage: CoverageEstimate
    blockage_stats: LinkStats
    trials_used: int

    @property
    def outage(self):
        return 1.0 - self.coverage.value

    @property
    def std_error(self):
        p = self.coverage.value
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.trials_used)


def _chunks(n):
    full, rest = divmod(int(n), CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _draw_geometry(spec, stream, n):
    """User distances, RIS azimuths and blocking indicators for ``n`` trials."""
    cfg = spec.cfg
    nR = cfg.n_R
    if spec.user_law == "uniform":
        r0 = cfg.RB + (cfg.R - 2 * cfg.RB) * stream.random(n)
    else:
        r0 = np.full(n, cfg.r0)
    if spec.ris_law == "uniform":
        phi = stream.random((n, nR)) * TWO_PI
    else:
        phi = np.broadcast_to(np.asarray(cfg.ris_angles, dtype=float), (n, nR))

    model = spec.correlation_model
    if model == "exact_geometric":
        centers = sample_centers(cfg, stream, n)
        user = np.stack([r0, np.zeros(n)], axis=-1)
        bs = np.zeros((n, 2))
        direct = segments_blocked(bs, user, centers, cfg.RB)
        br = np.empty((n, nR), dtype=bool)
        ru = np.empty((n, nR), dtype=bool)
        for i in range(nR):
            z = np.stack([cfg.R * np.cos(phi[:, i]), cfg.R * np.sin(phi[:, i])], axis=-1)
            br[:, i] = segments_blocked(bs, z, centers, cfg.RB)
            ru[:, i] = segments_blocked(z, user, centers, cfg.RB)
        cascade = br | ru
    else:
        q_b = ba.q_direct(r0, cfg.R, cfg.RB, cfg.nB)
        direct = stream.random(n) < q_b
        rr = r0[:, None]
        if model == "intra_ris_correlated":
            q_c = np.asarray(ba.cascade_block_prob(phi, rr, cfg.R, cfg.RB, cfg.nB, spec.form))
            q_c = np.broadcast_to(q_c, (n, nR))
            cascade = stream.random((n, nR)) < q_c
            # sub-link marginals are not modelled separately here
            br = ru = cascade
        else:
            q_br = np.broadcast_to(ba.ris_user_block_prob(phi, 0.0, cfg.R, cfg.RB, cfg.nB), (n, nR))
            q_ru = np.broadcast_to(ba.ris_user_block_prob(phi, rr, cfg.R, cfg.RB, cfg.nB), (n, nR))
            br = stream.random((n, nR)) < q_br
            ru = stream.random((n, nR)) < q_ru
            cascade = br | ru
    return r0, phi, direct, br, ru, cascade


def _counts(direct, br, ru, cascade):
    all_blocked = np.all(cascade, axis=1) if cascade.shape[1] else np.ones(len(direct), bool)
    return np.concatenate([
        [direct.sum(), all_blocked.sum()],
        br.sum(axis=0), ru.sum(axis=0), cascade.sum(axis=0),
    ]).astype(np.int64)


def _run_chunk(args):
    spec, k, n, with_fading = args
    stream = substream(spec.seed, spec.point, k)
    r0, phi, direct, br, ru, cascade = _draw_geometry(spec, stream, n)
    counts = _counts(direct, br, ru, cascade)
    if not with_fading:
        return 0, counts
    cp, cfg = spec.cp, spec.cfg
    h_d = draw_direct_fading(stream, n)
    h_i = draw_indirect_fading(stream, cp.m_nak, cp.omega, (n, cfg.n_R))
    power = np.where(direct, 0.0, cp.direct_mean_power(r0) * h_d)
    if cfg.n_R:
        u = np.asarray(cp.reflected_mean_power(r0[:, None], phi, cfg.R))
        power = power + np.sum(np.where(cascade, 0.0, u * h_i), axis=1)
    covered = power / cp.N0 >= spec.gamma_th
    return int(covered.sum()), counts


def _collect(spec, with_fading, workers):
    jobs = [(spec, k, n, with_fading) for k, n in enumerate(_chunks(spec.n_trials))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    hits = sum(p[0] for p in parts)
    counts = np.sum([p[1] for p in parts], axis=0)
    return hits, counts


def _stats(counts, n, nR):
    f = counts / n
    return LinkStats(
        trials=n,
        direct=float(f[0]),
        all_cascades=float(f[1]),
        bs_ris=tuple(float(x) for x in f[2:2 + nR]),
        ris_user=tuple(float(x) for x in f[2 + nR:2 + 2 * nR]),
        cascade=tuple(float(x) for x in f[2 + 2 * nR:2 + 3 * nR]),
    )


def estimate_link_probs(spec: SimSpec, workers=1):
    _, counts = _collect(spec, False, workers)
    return _stats(counts, spec.n_trials, spec.cfg.n_R)


def simulate_coverage(spec: SimSpec, workers=1):
    hits, counts = _collect(spec, True, workers)
    n = spec.n_trials
    p = hits / n
    est = CoverageEstimate(p, "montecarlo", binomial_half_width(p, n))
    return SimResult(est, _stats(counts, n, spec.cfg.n_R), n)


def estimate_single_blockage_probs(blockage, r0, R, RB, n_trials, seed=0):
    """Blocking frequencies ``(p_ris_user, p_bs_ris, p_cascade)`` for one
    fixed blockage disk and a RIS uniform on the wall."""
    stream = substream(seed, 0, 0)
    phi = stream.random(int(n_trials)) * TWO_PI
    z = np.stack([R * np.cos(phi), R * np.sin(phi)], axis=-1)
    c = blockage.center.reshape(1, 2)
    ru = segments_blocked(z, np.array([r0, 0.0]), c, RB)
    br = segments_blocked(np.zeros(2), z, c, RB)
    return ba.CascadeBlockProbs(float(ru.mean()), float(br.mean()), float((ru | br).mean()))


_SCENE_AXES = ("nB", "RB", "R", "r0")


def vary(spec: SimSpec, axis, value):
    """Copy of ``spec`` with one parameter changed."""
    if callable(axis):
        return axis(spec, value)
    if axis in _SCENE_AXES:
        v = int(value) if axis == "nB" else float(value)
        return dataclasses.replace(spec, cfg=dataclasses.replace(spec.cfg, **{axis: v}))
    if axis == "n_R":
        cfg = dataclasses.replace(spec.cfg, ris_angles=equispaced_angles(int(value)))
        return dataclasses.replace(spec, cfg=cfg)
    if axis in ("gamma_th", "n_trials", "seed"):
        return dataclasses.replace(spec, **{axis: value})
    raise ValueError(f"unknown sweep axis {axis!r}")


def sweep(template: SimSpec, axis, values, workers=1):
    """One ``SimResult`` per axis value; point ``i`` uses stream ``(seed, i)``."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one axis value")
    if not all(np.isfinite(float(v)) for v in values):
        raise ValueError("sweep axis values must be finite")
    return [simulate_coverage(dataclasses.replace(vary(template, axis, v), point=i), workers)
            for i, v in enumerate(values)]
