"""Numerical kernels: adaptive Gauss-Kronrod quadrature, semi-infinite
oscillatory integration and a first-true integer search.

Integrands are vectorised: they receive a 1-D float array of abscissae and
return an array of the same shape (real or complex).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError

# Gauss-Kronrod 7/15 pair (QUADPACK qk15), nodes on [-1, 1].
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (x[1], x[3], x[5], x[7]=0).
for _k, _w in zip((1, 3, 5), _WG[:3]):
    _GAUSS[_k] = _w
    _GAUSS[14 - _k] = _w
_GAUSS[7] = _WG[3]


@dataclass(frozen=True)
class QuadSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_evals: int = 1_000_000
    tail_threshold: float = 1e-8

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.tail_threshold <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_evals < 15:
            raise ValueError("max_evals must cover at least one 15-node panel")


def _gk15(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    y = np.asarray(f(c + h * _NODES))
    k = h * np.dot(_KRONROD, y)
    g = h * np.dot(_GAUSS, y)
    return k, abs(k - g)


def integrate_finite(f, a, b, spec=QuadSpec()):
    """Adaptive Gauss-Kronrod (7/15) integration of ``f`` over ``[a, b]``.

    Returns ``(value, error_estimate)``. The interval with the largest
    embedded error is bisected until the summed error meets
    ``max(abs_tol, rel_tol * |value|)``.
    """
    value, err, _ = _adaptive(f, float(a), float(b), spec)
    return value, err


def _adaptive(f, a, b, spec):
    if a == b:
        return 0.0, 0.0, 0
    total, total_err, evals, _ = _adaptive_panels(f, a, b, spec)
    return total, total_err, evals


def _adaptive_panels(f, a, b, spec):
    value, err = _gk15(f, a, b)
    evals = 15
    heap = [(-err, a, b, value)]
    total, total_err = value, err
    while total_err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if evals + 30 > spec.max_evals:
            raise NonConvergenceError(
                f"integrate_finite: {evals} evaluations, error {total_err:.3g}"
            )
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # interval cannot be split further in floating point
            raise NonConvergenceError("integrate_finite: interval underflow")
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        evals += 30
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
    # re-sum to shed accumulated rounding from the running updates
    total = sum(item[3] for item in heap)
    total_err = sum(-item[0] for item in heap)
    return total, total_err, evals, heap


def adaptive_rule(f, a, b, spec=QuadSpec(), panels=16):
    """Kronrod nodes, weights and integrand values on an adapted partition.

    ``f`` maps an array of abscissae to values of shape ``(..., n)``, so
    several integrands can share one partition. All panels of a level are
    evaluated in one call; a panel is accepted once every component's
    Gauss-Kronrod discrepancy is below its share of ``spec.abs_tol``. The
    result can be reused for other integrands with the same rough spots.
    """
    a, b = float(a), float(b)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1], edges[1:]
    xs, ws, ys = [], [], []
    evals = 0
    while lo.size:
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        x = c[:, None] + h[:, None] * _NODES[None, :]
        y = np.asarray(f(x.ravel()))
        y = y.reshape(y.shape[:-1] + x.shape)
        evals += x.size
        k = h * np.tensordot(y, _KRONROD, axes=([-1], [0]))
        g = h * np.tensordot(y, _GAUSS, axes=([-1], [0]))
        err = np.abs(k - g).reshape(-1, lo.size).max(axis=0)
        ok = (err <= spec.abs_tol * (hi - lo) / (b - a)) | (hi - lo < 1e-12 * (b - a))
        xs.append(x[ok])
        ws.append(h[ok, None] * _KRONROD[None, :])
        ys.append(y[..., ok, :])
        lo, hi = lo[~ok], hi[~ok]
        if lo.size and evals + 30 * lo.size > spec.max_evals:
            raise NonConvergenceError(f"adaptive_rule: {evals} evaluations, {lo.size} panels open")
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    x = np.concatenate([v.ravel() for v in xs])
    w = np.concatenate([v.ravel() for v in ws])
    y = np.concatenate([v.reshape(v.shape[:-2] + (-1,)) for v in ys], axis=-1)
    order = np.argsort(x)
    return x[order], w[order], y[..., order]


def _wynn_epsilon(partials):
    """Wynn epsilon extrapolation of a sequence of partial sums."""
    n = len(partials)
    e_prev = np.zeros(n + 1)
    e_cur = np.asarray(partials, dtype=float).copy()
    best = e_cur[-1]
    for k in range(1, n):
        diff = e_cur[1:] - e_cur[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            e_next = e_prev[1:len(e_cur)] + 1.0 / diff
        if not np.all(np.isfinite(e_next)):
            break
        e_prev, e_cur = e_cur, e_next
        if k % 2 == 0:
            best = e_cur[-1]
        if len(e_cur) < 2:
            break
    return best


def integrate_semi_infinite_oscillatory(f, spec=QuadSpec(), start=0.0, width=1.0,
                                        freq=None, growth=2.0):
    """Integrate ``f`` over ``[start, inf)`` panel by panel.

    Panels grow geometrically from ``width``. When ``freq`` (angular
    frequency of the dominant oscillation) is given, panel width is capped at
    half a period and the partial sums over capped panels are accelerated with
    the Wynn epsilon algorithm. Accumulation stops once three consecutive
    panels each contribute less than ``spec.tail_threshold`` (or the
    extrapolated value changes by less than that for three panels).

    Returns ``(value, error_estimate)``.
    """
    cap = math.pi / freq if freq else math.inf
    a = float(start)
    w = float(width)
    total = 0.0
    total_err = 0.0
    quiet = 0
    partials = []
    extrap_hist = []
    evals = 0
    while True:
        h = min(w, cap)
        # give each panel whatever budget is left
        remaining = spec.max_evals - evals
        if remaining < 15:
            raise NonConvergenceError(
                f"oscillatory integral: budget exhausted at t={a:.4g}"
            )
        ps = QuadSpec(spec.abs_tol, spec.rel_tol, remaining, spec.tail_threshold)
        try:
            val, err, used = _adaptive(f, a, a + h, ps)
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"oscillatory integral panel at t={a:.4g}: {exc}")
        evals += used
        total += val
        total_err += err
        a += h
        if h < w:
            partials.append(total)
        else:
            w *= growth
        quiet = quiet + 1 if abs(val) < spec.tail_threshold else 0
        if quiet >= 3:
            return total, total_err + 3 * spec.tail_threshold
        if len(partials) >= 6:
            ext = _wynn_epsilon(partials[-min(len(partials), 24):])
            extrap_hist.append(ext)
            if len(extrap_hist) >= 4:
                recent = extrap_hist[-4:]
                spread = max(recent) - min(recent)
                if spread < spec.tail_threshold:
                    return ext, total_err + spread + spec.tail_threshold
        if len(partials) > 100_000:
            raise NonConvergenceError("oscillatory integral: too many panels")


def find_min_count(predicate, n_max):
    """Smallest ``n`` in ``1..n_max`` with ``predicate(n)`` true, else None.

    Scans upward, so ``predicate(n - 1)`` is known false (or ``n == 1``) for
    the returned value even when the predicate is not monotone.
    """
    for n in range(1, int(n_max) + 1):
        if predicate(n):
            return n
    return None
