"""Gaps and nearest-neighbour distances of circle rotation orbits.

Points live on R/Z.  Rational rotations are handled exactly with
:class:`fractions.Fraction`; a float rotation switches to tolerance
clustering.  For sweeps there is an integer path working in units of ``1/b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BoundViolation, DegenerateOrbitError
from .nnd import EXACT, ClusterPolicy, MetricOracle, NndSpectrum, make_spectrum

__all__ = [
    "RotationOrbit",
    "rotation_orbit",
    "circular_gap_spectrum",
    "geometric_nnd_count",
    "arc_distance",
    "circle_oracle",
    "chord_oracle",
    "integer_orbit_counts",
    "three_gap_sweep",
]


@dataclass(frozen=True)
class RotationOrbit:
    p: object
    n: int
    offset: object
    residues: tuple  # i*p + offset mod 1 for i = 0..n, in orbit order
    distinct: tuple  # distinct residues in order of first appearance
    first_index: tuple  # orbit index where each distinct residue first occurs
    multiplicity: dict = field(compare=False)

    @property
    def exact(self) -> bool:
        return isinstance(self.p, Fraction)


def _mod1(x):
    if isinstance(x, Fraction):
        return x - math.floor(x)
    return x % 1.0


def rotation_orbit(p, n: int, offset=0) -> RotationOrbit:
    """Orbit ``{i*p + offset mod 1 : i = 0..n}``; exact for int/Fraction/str input."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(p, str):
        p = Fraction(p)
    if isinstance(p, int):
        p = Fraction(p)
    exact = isinstance(p, Fraction)
    if exact:
        offset = Fraction(offset) if not isinstance(offset, float) else Fraction(offset)
    else:
        p = float(p)
        offset = float(offset)
    p = _mod1(p)
    offset = _mod1(offset)
    res = tuple(_mod1(offset + i * p) for i in range(n + 1))
    seen: dict = {}
    distinct, first = [], []
    for i, r in enumerate(res):
        if r in seen:
            seen[r] += 1
        else:
            seen[r] = 1
            distinct.append(r)
            first.append(i)
    return RotationOrbit(p, n, offset, res, tuple(distinct), tuple(first), seen)


def arc_distance(x, y):
    d = abs(x - y)
    d = d - math.floor(d)
    return min(d, 1 - d)


def circle_oracle(exact=True) -> MetricOracle:
    if exact:
        return MetricOracle(arc_distance, exact=True)

    def pairwise(X):
        a = np.asarray(X, dtype=float)
        d = np.abs(a[:, None] - a[None, :]) % 1.0
        return np.minimum(d, 1.0 - d)

    return MetricOracle(arc_distance, exact=False, err=1e-15, pairwise=pairwise)


def chord_oracle() -> MetricOracle:
    """Euclidean distance of the unit circle in the plane, ``2 sin(pi * arc)``."""

    def dist(x, y):
        return 2.0 * math.sin(math.pi * float(arc_distance(x, y)))

    def pairwise(X):
        a = np.asarray(X, dtype=float)
        d = np.abs(a[:, None] - a[None, :]) % 1.0
        return 2.0 * np.sin(np.pi * np.minimum(d, 1.0 - d))

    return MetricOracle(dist, exact=False, err=1e-15, pairwise=pairwise)


def _sorted_gaps(values: Sequence):
    order = sorted(range(len(values)), key=lambda i: values[i])
    v = [values[i] for i in order]
    gaps = [v[i + 1] - v[i] for i in range(len(v) - 1)]
    gaps.append(1 - v[-1] + v[0])
    return order, gaps


def _need_two(o: RotationOrbit):
    if len(o.distinct) < 2:
        raise DegenerateOrbitError(
            f"orbit of p={o.p} with n={o.n} has a single distinct point"
        )


def circular_gap_spectrum(o: RotationOrbit, policy: ClusterPolicy | None = None) -> list:
    """Sorted distinct lengths of consecutive arcs, wraparound included."""
    _need_two(o)
    _, gaps = _sorted_gaps(o.distinct)
    if o.exact:
        out = sorted(set(gaps))
        if len(out) > 3:
            raise BoundViolation(
                f"{len(out)} distinct gaps", {"p": str(o.p), "n": o.n, "gaps": [str(g) for g in out]}
            )
        return out
    policy = policy or ClusterPolicy()
    gs = sorted(gaps)
    out = [gs[0]]
    for g in gs[1:]:
        if g - out[-1] > policy.tau * max(1.0, out[-1]):
            out.append(g)
    return out


def geometric_nnd_count(o: RotationOrbit, arc: bool = True,
                        policy: ClusterPolicy | None = None) -> NndSpectrum:
    """NND spectrum of the distinct orbit points on the unit circle.

    The nearest neighbour of a point is one of its two cyclic neighbours, so
    the spectrum comes from the sorted gaps.  Points are indexed in order of
    first appearance along the orbit.
    """
    _need_two(o)
    pts = o.distinct
    m = len(pts)
    order, gaps = _sorted_gaps(pts)
    arcs = [min(g, 1 - g) for g in gaps]  # arcs[r]: between sorted r and r+1
    keys = [None] * m
    nbrs = [None] * m
    for r, i in enumerate(order):
        left, right = arcs[r - 1], arcs[r]
        li, ri = order[r - 1], order[(r + 1) % m]
        if left < right:
            keys[i], nbrs[i] = left, li
        elif right < left:
            keys[i], nbrs[i] = right, ri
        else:
            keys[i], nbrs[i] = left, min(li, ri)
    if not arc:
        keys = [2.0 * math.sin(math.pi * float(k)) for k in keys]
        return make_spectrum(keys, nbrs, policy or ClusterPolicy(), False)
    if o.exact:
        spec = make_spectrum(keys, nbrs, EXACT, False)
        if spec.count > 3:
            raise BoundViolation(
                f"|NND| = {spec.count} > 3", {"p": str(o.p), "n": o.n}
            )
        return spec
    return make_spectrum([float(k) for k in keys], nbrs, policy or ClusterPolicy(), False)


def integer_orbit_counts(a: int, b: int, n: int, c: int = 0):
    """Gaps and NND values of ``{(c + i*a)/b mod 1 : i = 0..n}`` in units of ``1/b``.

    Returns ``(gap_values, nnd_values)`` as sorted integer arrays of distinct
    values.  All arithmetic is in int64, hence exact.
    """
    i = np.arange(n + 1, dtype=np.int64)
    r = np.unique((c + i * a) % b)
    if r.size < 2:
        raise DegenerateOrbitError(f"orbit of {a}/{b} with n={n} has a single point")
    g = np.empty(r.size, dtype=np.int64)
    g[:-1] = np.diff(r)
    g[-1] = b - r[-1] + r[0]
    arcs = np.minimum(g, b - g)
    nnd = np.minimum(arcs, np.roll(arcs, 1))
    return np.unique(g), np.unique(nnd)


def three_gap_sweep(count: int = 10_000, denom_max: int = 10_000, n_max: int = 1000,
                    seed: int = 0):
    """Random rational rotations checked exactly; yields one row per sample.

    Denominators ``b`` are uniform in ``[2, denom_max]``, numerators uniform
    among residues coprime to ``b``, and ``n`` uniform in ``[1, n_max]``.
    Each row is ``(a, b, n, gaps, nnd)`` with integer values in units ``1/b``.
    """
    rng = np.random.default_rng(seed)
    for _ in range(count):
        b = int(rng.integers(2, denom_max + 1))
        while True:
            a = int(rng.integers(1, b))
            if math.gcd(a, b) == 1:
                break
        n = int(rng.integers(1, n_max + 1))
        gaps, nnd = integer_orbit_counts(a, b, n)
        yield a, b, n, gaps, nnd
