"""Nearest-neighbour distances of finite point sets and their spectra.

A spectrum is the multiset of per-point nearest-neighbour distances together
with its partition into distinct values.  Distances come from a
:class:`MetricOracle`, which may be exact (returning rationals, possibly
squared distances) or floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .errors import DegenerateOrbitError, DomainError

__all__ = [
    "ClusterPolicy",
    "EXACT",
    "MetricOracle",
    "NndClass",
    "NndSpectrum",
    "nnd_of_point",
    "nnd_spectrum",
    "brute_force_spectrum",
    "make_spectrum",
    "orbit_spectrum",
    "cluster_keys",
]


@dataclass(frozen=True)
class ClusterPolicy:
    """How per-point values are merged into distinct classes.

    ``mode="exact"`` merges only equal keys.  ``mode="tolerance"`` sorts the
    distances and merges neighbours ``v <= w`` with ``w - v <= tau * max(1, v)``.
    """

    mode: str = "tolerance"
    tau: float = 1e-9

    def __post_init__(self):
        if self.mode not in ("exact", "tolerance"):
            raise DomainError(f"unknown cluster mode {self.mode!r}")
        if self.mode == "tolerance" and not self.tau > 0:
            raise DomainError("tolerance clustering needs tau > 0")


EXACT = ClusterPolicy("exact")


@dataclass(frozen=True)
class MetricOracle:
    """A distance function on points.

    ``dist(x, y)`` returns a *key*: the distance itself, or its square when
    ``squared`` is set (exact Euclidean-type metrics are rational only after
    squaring).  ``pairwise(X, Y)`` is an optional vectorised version returning
    the key matrix; it is only used in floating mode.
    """

    dist: Callable[[Any, Any], Any]
    exact: bool = False
    err: float = 0.0
    squared: bool = False
    pairwise: Callable[..., np.ndarray] | None = None

    def __call__(self, x, y):
        return self.dist(x, y)

    def to_distance(self, key) -> float:
        return math.sqrt(key) if self.squared else float(key)


@dataclass(frozen=True)
class NndClass:
    key: Any
    value: float
    count: int


@dataclass(frozen=True)
class NndSpectrum:
    keys: tuple
    neighbors: tuple
    classes: tuple
    class_index: tuple
    policy: ClusterPolicy
    squared: bool = False

    @property
    def count(self) -> int:
        """Number of distinct nearest-neighbour distances, ``|NND(X)|``."""
        return len(self.classes)

    def __len__(self):
        return len(self.keys)

    def distances(self) -> np.ndarray:
        f = math.sqrt if self.squared else float
        return np.array([f(k) for k in self.keys], dtype=float)

    def values(self) -> list:
        return [c.value for c in self.classes]

    def to_csv(self) -> str:
        lines = ["point_index,nnd_value,class_index"]
        for i, (k, c) in enumerate(zip(self.keys, self.class_index)):
            lines.append(f"{i},{format_key(k, self.squared)},{c}")
        return "\n".join(lines) + "\n"


def format_key(key, squared=False) -> str:
    if isinstance(key, (Fraction, int, np.integer)):
        s = str(Fraction(key))
        return f"sqrt({s})" if squared else s
    v = math.sqrt(key) if squared else float(key)
    return repr(float(v))


def _as_distance(key, squared):
    return math.sqrt(key) if squared else float(key)


def cluster_keys(keys: Sequence, policy: ClusterPolicy, squared=False):
    """Partition ``keys`` into classes; returns ``(classes, class_index)``."""
    n = len(keys)
    if policy.mode == "exact":
        distinct = sorted(set(keys))
        pos = {k: c for c, k in enumerate(distinct)}
        index = tuple(pos[k] for k in keys)
        counts = [0] * len(distinct)
        for c in index:
            counts[c] += 1
        classes = tuple(
            NndClass(k, _as_distance(k, squared), counts[c]) for c, k in enumerate(distinct)
        )
        return classes, index

    vals = [_as_distance(k, squared) for k in keys]
    order = sorted(range(n), key=lambda i: vals[i])
    index = [0] * n
    classes = []
    start = None
    prev = None
    members = 0
    for i in order:
        v = vals[i]
        if prev is not None and v - prev <= policy.tau * max(1.0, prev):
            members += 1
        else:
            if start is not None:
                classes.append(NndClass(keys[start], vals[start], members))
            start = i
            members = 1
        index[i] = len(classes)
        prev = v
    classes.append(NndClass(keys[start], vals[start], members))
    return tuple(classes), tuple(index)


def make_spectrum(keys, neighbors, policy: ClusterPolicy = EXACT, squared=False) -> NndSpectrum:
    if len(keys) < 2:
        raise DomainError("a spectrum needs at least two points")
    classes, index = cluster_keys(list(keys), policy, squared)
    return NndSpectrum(tuple(keys), tuple(neighbors), classes, index, policy, squared)


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    return a == b


def nnd_of_point(x, X: Sequence, m: MetricOracle):
    """Nearest-neighbour key of ``x`` in ``X`` and the index of that neighbour.

    Ties go to the lowest index.  ``x`` is located in ``X`` by equality (first
    match).
    """
    if len(X) < 2:
        raise DomainError("need |X| >= 2")
    for i, y in enumerate(X):
        if _same(x, y):
            break
    else:
        raise DomainError("x is not a member of X")
    best = None
    arg = -1
    for j, y in enumerate(X):
        if j == i:
            continue
        d = m.dist(X[i], y)
        if best is None or d < best:
            best, arg = d, j
    return best, arg


def nnd_spectrum(X: Sequence, m: MetricOracle, policy: ClusterPolicy | None = None) -> NndSpectrum:
    """Spectrum of ``X`` under ``m``; vectorised when the oracle allows it."""
    if policy is None:
        policy = EXACT if m.exact else ClusterPolicy()
    n = len(X)
    if n < 2:
        raise DomainError("need |X| >= 2")

    if m.pairwise is not None and not m.exact:
        D = np.array(m.pairwise(X), dtype=float)
        np.fill_diagonal(D, np.inf)
        nb = np.argmin(D, axis=1)
        keys = D[np.arange(n), nb]
        return make_spectrum([float(k) for k in keys], [int(j) for j in nb], policy, m.squared)

    best = [None] * n
    arg = [-1] * n
    for i in range(n):
        for j in range(i + 1, n):
            d = m.dist(X[i], X[j])
            # j ascends, so strict improvement keeps the lowest index
            if best[i] is None or d < best[i]:
                best[i], arg[i] = d, j
            if best[j] is None or d < best[j] or (d == best[j] and i < arg[j]):
                best[j], arg[j] = d, i
    return make_spectrum(best, arg, policy, m.squared)


def brute_force_spectrum(X: Sequence, m: MetricOracle) -> NndSpectrum:
    """Reference all-pairs spectrum with exact-equality clustering."""
    n = len(X)
    if n < 2:
        raise DomainError("need |X| >= 2")
    keys, arg = [], []
    for i in range(n):
        cand = [(m.dist(X[i], X[j]), j) for j in range(n) if j != i]
        d, j = min(cand)
        keys.append(d)
        arg.append(j)
    return make_spectrum(keys, arg, EXACT, m.squared)


def orbit_spectrum(step_keys: Sequence, policy: ClusterPolicy = EXACT, squared=False,
                   zero=None) -> NndSpectrum:
    """Spectrum of an isometry orbit ``x_0..x_n`` from its step distances.

    ``step_keys[m - 1]`` is the key of ``dist(x_0, x_m)`` for ``m = 1..n``.  For
    an isometry ``dist(x_i, x_j) = dist(x_0, x_{|i-j|})``, so the nearest
    neighbour of ``x_i`` is a prefix minimum over ``m <= max(i, n - i)``.

    A periodic orbit (some key equal to zero) is first collapsed to one period.
    """
    D = list(step_keys)
    n = len(D)
    if n < 1:
        raise DomainError("orbit needs n >= 1")
    if zero is None:
        zero = 0
    period = next((m for m, d in enumerate(D, start=1) if d == zero), None)
    if period is not None:
        if period == 1:
            raise DegenerateOrbitError("orbit point is fixed by the isometry")
        # cyclic set x_0..x_{P-1}; every point sees the same displacements
        inner = D[: period - 1]
        best = min(inner)
        mstar = inner.index(best) + 1
        keys = [best] * period
        nbrs = [min((i + mstar) % period, (i - mstar) % period) for i in range(period)]
        # lowest index among all neighbours at distance best
        for i in range(period):
            cands = [(i + m) % period for m in range(1, period) if inner[m - 1] == best]
            nbrs[i] = min(cands)
        return make_spectrum(keys, nbrs, policy, squared)

    # prefix minima with the smallest and largest m attaining them
    pm, lo, hi = [], [], []
    cur = None
    for m, d in enumerate(D, start=1):
        if cur is None or d < cur:
            cur, first, last = d, m, m
        elif d == cur:
            last = m
        pm.append(cur)
        lo.append(first)
        hi.append(last)
    keys, nbrs = [], []
    for i in range(n + 1):
        M = max(i, n - i)
        v = pm[M - 1]
        keys.append(v)
        # lowest neighbour index: largest m <= i going left, else smallest m going right
        left = [m for m in range(1, min(i, M) + 1) if D[m - 1] == v]
        if left:
            nbrs.append(i - max(left))
        else:
            right = next(m for m in range(1, n - i + 1) if D[m - 1] == v)
            nbrs.append(i + right)
    return make_spectrum(keys, nbrs, policy, squared)


# --- point-set text format -------------------------------------------------

def parse_number(tok: str) -> Fraction:
    tok = tok.strip()
    if not tok:
        raise DomainError("empty coordinate")
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"bad coordinate {tok!r}") from exc


def read_points(text: str) -> list[tuple[Fraction, ...]]:
    """Parse one point per line; coordinates are ``p/q`` or decimals.

    Coordinates may be separated by commas or whitespace; ``#`` starts a
    comment.  Decimals are read exactly (``0.1`` is ``1/10``).
    """
    pts = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.replace(",", " ").split()
        pts.append(tuple(parse_number(t) for t in toks))
    if pts and len({len(p) for p in pts}) != 1:
        raise DomainError("points have mixed dimensions")
    return pts


def write_points(points) -> str:
    return "".join(" ".join(str(Fraction(c)) for c in p) + "\n" for p in points)
