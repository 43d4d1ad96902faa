"""Transverse self-intersections of sampled curves and the distance-squared
second-derivative triple at a crossing.

A curve is anything with ``times``, ``positions``, ``velocities`` and a step
``h`` (a :class:`GeodesicTrajectory` or :class:`Curve`).  Candidate segment
pairs come from a k-d tree over segment midpoints; each cluster of nearby
pairs is refined to a closest approach on the cubic Hermite interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DomainError

THETA_MIN = 1e-3

__all__ = [
    "Curve",
    "IntersectionRecord",
    "IntersectionPoint",
    "IntersectionReport",
    "count_self_intersections",
    "hermite_eval",
    "derivative_triple_analytic",
    "derivative_triple_fd",
    "second_differences",
]


@dataclass
class Curve:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    h: float

    @property
    def length(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class IntersectionRecord:
    s: float
    t: float
    location: tuple
    angle: float
    gap: float  # |gamma(s) - gamma(t)| at the refined closest approach


@dataclass
class IntersectionPoint:
    location: tuple
    multiplicity: int
    records: list = field(default_factory=list)


@dataclass
class IntersectionReport:
    records: list
    points: list
    ambiguous: list
    eps_match: float
    theta_min: float

    @property
    def total(self) -> int:
        """Sum of multiplicities over intersection points."""
        return sum(p.multiplicity for p in self.points)


def hermite_eval(curve, t: float):
    """Position and derivative of the cubic Hermite interpolant at ``t``."""
    times = curve.times
    i = int(np.searchsorted(times, t, side="right") - 1)
    i = min(max(i, 0), len(times) - 2)
    t0, t1 = times[i], times[i + 1]
    dt = t1 - t0
    u = (t - t0) / dt
    p0, p1 = curve.positions[i], curve.positions[i + 1]
    m0, m1 = curve.velocities[i] * dt, curve.velocities[i + 1] * dt
    u2, u3 = u * u, u * u * u
    pos = (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m1
    der = ((6 * u2 - 6 * u) * p0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * p1
           + (3 * u2 - 2 * u) * m1) / dt
    return pos, der


def _segment_closest(A0, A1, B0, B1):
    """Vectorised closest approach of segments ``A0A1`` and ``B0B1``.

    Returns ``(dist, u, w)`` with ``u, w`` in ``[0, 1]`` along each segment.
    """
    d1 = A1 - A0
    d2 = B1 - B0
    r = A0 - B0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    den = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(den > 1e-300, np.clip((b * f - c * e) / den, 0.0, 1.0), 0.0)
        w = (b * u + f) / e
    w_c = np.clip(w, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(w != w_c, np.clip((b * w_c - c) / a, 0.0, 1.0), u)
    w = w_c
    diff = A0 + d1 * u[:, None] - (B0 + d2 * w[:, None])
    return np.linalg.norm(diff, axis=1), u, w


def _refine(curve, s, t, L):
    """Gauss-Newton on ``|gamma(s) - gamma(t)|^2`` from ``(s, t)``."""
    for _ in range(30):
        ps, ds = hermite_eval(curve, s)
        pt, dtv = hermite_eval(curve, t)
        r = ps - pt
        J = np.column_stack([ds, -dtv])
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        s = min(max(s + step[0], 0.0), L)
        t = min(max(t + step[1], 0.0), L)
        if np.linalg.norm(step) < 1e-15:
            break
    ps, ds = hermite_eval(curve, s)
    pt, dtv = hermite_eval(curve, t)
    return s, t, ps, pt, ds, dtv


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[max(ra, rb)] = min(ra, rb)


def count_self_intersections(curve, eps_match: float | None = None,
                             theta_min: float = THETA_MIN) -> IntersectionReport:
    """Transverse self-intersections with multiplicities.

    Segment pairs whose parameters differ by at most ``3 eps + 2h`` are never
    compared.  A crossing is recorded when the refined closest approach is
    within ``eps_match`` and the angle ``alpha`` between the two branches has
    ``min(alpha, pi - alpha) >= theta_min``; closer angles are reported as
    ambiguous.  Records within ``eps_match`` of each other form one point whose
    multiplicity is the number of branch pairs through it.
    """
    h = float(curve.h)
    eps = 10.0 * h if eps_match is None else float(eps_match)
    P = np.asarray(curve.positions, dtype=float)
    times = np.asarray(curve.times, dtype=float)
    L = float(times[-1])
    if len(P) < 3:
        return IntersectionReport([], [], [], eps, theta_min)
    A0, A1 = P[:-1], P[1:]
    mids = 0.5 * (A0 + A1)
    seg = np.linalg.norm(A1 - A0, axis=1)
    if seg.max() > 50.0 * max(float(np.median(seg)), 1e-300):
        # one long chord would make every segment a candidate partner
        raise DomainError("curve samples are too uneven; resample with a uniform step")
    tree = cKDTree(mids)
    pairs = tree.query_pairs(float(seg.max()) + eps, output_type="ndarray")
    if len(pairs) == 0:
        return IntersectionReport([], [], [], eps, theta_min)
    i, j = np.minimum(pairs[:, 0], pairs[:, 1]), np.maximum(pairs[:, 0], pairs[:, 1])
    keep = times[j] - times[i + 1] > 3 * eps + 2 * h
    i, j = i[keep], j[keep]
    dist, u, w = _segment_closest(A0[i], A1[i], A0[j], A1[j])
    close = dist <= eps
    i, j, dist, u, w = i[close], j[close], dist[close], u[close], w[close]

    index = {(int(a), int(b)): n for n, (a, b) in enumerate(zip(i, j))}
    uf = _UnionFind(len(index))
    for (a, b), n in index.items():
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                m = index.get((a + da, b + db))
                if m is not None:
                    uf.union(n, m)
    clusters: dict = {}
    for n in range(len(index)):
        r = uf.find(n)
        if r not in clusters or dist[n] < dist[clusters[r]]:
            clusters[r] = n

    records, ambiguous = [], []
    seen = set()
    for r in sorted(clusters):
        n = clusters[r]
        s0 = times[i[n]] + u[n] * (times[i[n] + 1] - times[i[n]])
        t0 = times[j[n]] + w[n] * (times[j[n] + 1] - times[j[n]])
        s, t, ps, pt, ds, dtv = _refine(curve, s0, t0, L)
        if s > t:
            s, t, ps, pt, ds, dtv = t, s, pt, ps, dtv, ds
        gap = float(np.linalg.norm(ps - pt))
        if gap > eps or t - s <= 3 * eps + 2 * h:
            continue
        key = (round(s / (h * 1e-3)), round(t / (h * 1e-3)))
        if key in seen:
            continue
        seen.add(key)
        cosang = float(ds @ dtv / (np.linalg.norm(ds) * np.linalg.norm(dtv)))
        alpha = math.acos(max(-1.0, min(1.0, cosang)))
        loc = tuple(float(c) for c in 0.5 * (ps + pt))
        rec = IntersectionRecord(float(s), float(t), loc, alpha, gap)
        if min(alpha, math.pi - alpha) < theta_min:
            ambiguous.append(rec)
        else:
            records.append(rec)
    records.sort(key=lambda rc: (rc.s, rc.t))

    uf = _UnionFind(len(records))
    locs = np.array([rc.location for rc in records]) if records else np.zeros((0, P.shape[1]))
    if len(records) > 1:
        for a, b in cKDTree(locs).query_pairs(eps):
            uf.union(a, b)
    groups: dict = {}
    for n, rc in enumerate(records):
        groups.setdefault(uf.find(n), []).append(rc)
    points = [IntersectionPoint(g[0].location, len(g), g) for _, g in sorted(groups.items())]
    return IntersectionReport(records, points, ambiguous, eps, theta_min)


# --- second-derivative triple ------------------------------------------------

def derivative_triple_analytic(s: float, t: float, alpha: float):
    """``(D1, D2, D3)`` for two unit-speed branches crossing at angle ``alpha``.

    ``D1 = 4 - 4 cos a``, ``D2 = 2 s^2 + 2 t^2 - 4 s t cos a`` and
    ``D3 = D2 + D1 (1 + s + t)``.
    """
    if not (s > 0 and t > 0):
        raise DomainError("s and t must be positive")
    if not 0 <= alpha <= math.pi:
        raise DomainError("alpha must lie in [0, pi]")
    c = math.cos(alpha)
    D1 = 4.0 - 4.0 * c
    D2 = 2.0 * s * s + 2.0 * t * t - 4.0 * s * t * c
    return D1, D2, D2 + D1 * (1.0 + s + t)


def second_differences(f2: Callable, xi):
    """Central second differences of ``f2`` along ``(1,0)``, ``(0,1)``, ``(1,1)``."""
    c = f2(0 * xi, 0 * xi)
    out = []
    for dx, dy in ((1, 0), (0, 1), (1, 1)):
        out.append((f2(dx * xi, dy * xi) - 2 * c + f2(-dx * xi, -dy * xi)) / (xi * xi))
    return tuple(out)


def derivative_triple_fd(gamma: Callable, s, t, xis: Sequence = (1e-2, 5e-3, 2.5e-3),
                         dist: Callable | None = None, sqdist: Callable | None = None,
                         crossing_tol: float | None = None):
    """Finite-difference ``(D1, D2, D3)`` of ``f^2`` at a self-intersection.

    ``f(x, y) = dist(gamma(s + x + s y), gamma(t + x + t y))``.  Give either
    ``dist`` or ``sqdist``.  With a geometric sequence of three steps
    (ratio 1/2) the result is Richardson-extrapolated twice (orders 2 and 4);
    with one step the raw differences are returned.  ``crossing_tol`` checks
    that ``gamma(s)`` and ``gamma(t)`` coincide.
    """
    if sqdist is None:
        if dist is None:
            raise DomainError("need dist or sqdist")

        def sqdist(p, q):
            return dist(p, q) ** 2

    if crossing_tol is not None:
        g = sqdist(gamma(s), gamma(t))
        if not float(g) <= crossing_tol ** 2:
            raise DomainError("gamma(s) and gamma(t) do not coincide; no certified crossing")
    if not s < t:
        raise DomainError("need s < t")

    def f2(x, y):
        return sqdist(gamma(s + x + s * y), gamma(t + x + t * y))

    raw = [second_differences(f2, xi) for xi in xis]
    if len(raw) == 1:
        return raw[0]
    if len(raw) != 3:
        raise DomainError("use one step or three halving steps")
    x0, x1, x2 = xis
    if abs(2 * x1 - x0) > 1e-12 * abs(x0) or abs(2 * x2 - x1) > 1e-12 * abs(x1):
        raise DomainError("Richardson steps must halve")
    out = []
    for k in range(3):
        a, b, c = raw[0][k], raw[1][k], raw[2][k]
        r1 = (4 * b - a) / 3
        r2 = (4 * c - b) / 3
        out.append((16 * r2 - r1) / 15)
    return tuple(out)
