"""Flat quotients of Euclidean space: tori R^k/Gamma and the flat Klein bottle.

Distances on a quotient are minima over group images.  Rectangular tori
reduce coordinate-wise; a general lattice uses depth-first closest-vector
enumeration with Gram-Schmidt pruning.  Rational input gives exact squared
distances as :class:`fractions.Fraction`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    CertificateFailure,
    DegenerateOrbitWarning,
    DomainError,
    UnsupportedDimensionError,
)
from .nnd import EXACT, MetricOracle, NndSpectrum, orbit_spectrum

__all__ = [
    "TorusLattice",
    "torus_sqdist",
    "torus_distance",
    "torus_oracle",
    "translation_orbit",
    "odd_primes_upto",
    "prime_tuples",
    "ManyGapsCertificate",
    "many_gaps_construction",
    "KleinQuotient",
    "KleinCrossing",
    "klein_geodesic_intersections",
    "klein_embed",
    "klein_curve",
]

MAX_GENERAL_DIM = 4


def _num(x):
    """Exact number for int/Fraction/str, float otherwise."""
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, np.integer):
        return Fraction(int(x))
    return float(x)


def _floor(x):
    return math.floor(x)


class TorusLattice:
    """The torus R^k / Gamma.

    Pass ``sides`` for the rectangular lattice generated by ``sides[i] * e_i``,
    or ``basis`` (rows are generators) for a general lattice with ``k <= 4``.
    """

    def __init__(self, sides: Sequence | None = None, basis: Sequence | None = None):
        if (sides is None) == (basis is None):
            raise DomainError("give exactly one of sides or basis")
        if sides is not None:
            self.sides = tuple(_num(s) for s in sides)
            if not self.sides:
                raise DomainError("k must be >= 1")
            if any(not s > 0 for s in self.sides):
                raise DomainError("side lengths must be positive")
            self.k = len(self.sides)
            self.basis = None
            self.exact = all(isinstance(s, Fraction) for s in self.sides)
        else:
            rows = [tuple(_num(c) for c in r) for r in basis]
            self.k = len(rows)
            if self.k < 1 or any(len(r) != self.k for r in rows):
                raise DomainError("basis must be a square k x k matrix")
            if self.k > MAX_GENERAL_DIM:
                raise UnsupportedDimensionError(
                    f"general lattices are limited to k <= {MAX_GENERAL_DIM}"
                )
            self.sides = None
            self.basis = tuple(rows)
            self.exact = all(isinstance(c, Fraction) for r in rows for c in r)
            self._prepare_general()

    @property
    def rectangular(self) -> bool:
        return self.sides is not None

    def __repr__(self):
        if self.rectangular:
            return f"TorusLattice(sides={[str(s) for s in self.sides]})"
        return f"TorusLattice(basis={[[str(c) for c in r] for r in self.basis]})"

    # -- general lattice helpers -------------------------------------------

    def _prepare_general(self):
        k = self.k
        if self.exact:
            inv = _fraction_inverse([list(r) for r in self.basis])
            if inv is None:
                raise DomainError("basis is singular")
            self._inv = inv
        else:
            B = np.array(self.basis, dtype=float)
            if abs(np.linalg.det(B)) < 1e-300:
                raise DomainError("basis is singular")
            self._inv = np.linalg.inv(B).tolist()
        B = np.array([[float(c) for c in r] for r in self.basis])
        # Gram-Schmidt of the rows, b_i = b*_i + sum_{j<i} mu_ij b*_j
        Bs = np.zeros_like(B)
        mu = np.eye(k)
        for i in range(k):
            v = B[i].copy()
            for j in range(i):
                mu[i, j] = B[i] @ Bs[j] / (Bs[j] @ Bs[j])
                v -= mu[i, j] * Bs[j]
            Bs[i] = v
        self._mu = mu
        self._bstar2 = np.einsum("ij,ij->i", Bs, Bs)
        self._Bf = B

    def coefficients(self, x):
        """Coordinates ``t`` with ``x = sum t_i b_i``."""
        k = self.k
        return tuple(sum(x[j] * self._inv[j][i] for j in range(k)) for i in range(k))

    def combine(self, t):
        k = self.k
        return tuple(sum(t[i] * self.basis[i][j] for i in range(k)) for j in range(k))

    # -- points ----------------------------------------------------------------

    def canonical(self, x) -> tuple:
        """Representative in the fundamental box or parallelepiped."""
        x = tuple(_num(c) for c in x)
        if len(x) != self.k:
            raise DomainError(f"expected {self.k} coordinates, got {len(x)}")
        if self.rectangular:
            out = []
            for c, s in zip(x, self.sides):
                r = c - _floor(c / s) * s
                if not isinstance(r, Fraction) and r >= s:
                    r = 0.0
                out.append(r)
            return tuple(out)
        t = self.coefficients(x)
        return self.combine(tuple(c - _floor(c) for c in t))

    def sqdist(self, x, y):
        """Squared quotient distance; exact when all inputs are rational."""
        d = [_num(a) - _num(b) for a, b in zip(x, y)]
        if self.rectangular:
            tot = 0
            for di, s in zip(d, self.sides):
                r = abs(di)
                r = r - _floor(r / s) * s
                m = min(r, s - r)
                tot += m * m
            return tot
        return self._cvp_sqdist(d)

    def _cvp_sqdist(self, d):
        """min over z in Z^k of |d - z B|^2 by pruned enumeration."""
        k = self.k
        t = self.coefficients(d)
        tf = [float(c) for c in t]
        exact = all(isinstance(c, Fraction) for c in d) and self.exact
        B = self.basis

        def value(z):
            v = [d[j] - sum(z[i] * B[i][j] for i in range(k)) for j in range(k)]
            return sum(c * c for c in v)

        # Babai rounding gives the starting radius
        z0 = [round(c) for c in tf]
        best = value(z0)
        bestz = tuple(z0)
        mu, bs2 = self._mu, self._bstar2
        slack = 1e-9
        z = [0] * k

        def rec(i, partial):
            nonlocal best, bestz
            if i < 0:
                val = value(z)
                if val < best or (val == best and tuple(z) < bestz):
                    best, bestz = val, tuple(z)
                return
            c = tf[i] + sum((tf[j] - z[j]) * mu[j, i] for j in range(i + 1, k))
            rem = float(best) * (1 + slack) + slack - partial
            if rem < 0:
                return
            r = math.sqrt(rem / bs2[i])
            for zi in range(math.floor(c - r) - 1, math.ceil(c + r) + 2):
                inc = (c - zi) ** 2 * bs2[i]
                if partial + inc <= float(best) * (1 + slack) + slack:
                    z[i] = zi
                    rec(i - 1, partial + inc)

        rec(k - 1, 0.0)
        return best if exact else float(best)


def torus_sqdist(L: TorusLattice, x, y):
    return L.sqdist(x, y)


def torus_distance(L: TorusLattice, x, y) -> float:
    return math.sqrt(L.sqdist(x, y))


def torus_oracle(L: TorusLattice) -> MetricOracle:
    """Squared-distance oracle; exact for rational lattices."""
    pw = None
    if L.rectangular and not L.exact:
        sides = np.array(L.sides, dtype=float)

        def pw(X):
            a = np.asarray(X, dtype=float)
            d = np.abs(a[:, None, :] - a[None, :, :]) % sides
            d = np.minimum(d, sides - d)
            return np.einsum("ijk,ijk->ij", d, d)

    return MetricOracle(L.sqdist, exact=L.exact, squared=True, err=0.0 if L.exact else 1e-12,
                        pairwise=pw)


def translation_orbit(L: TorusLattice, v, p0, n: int) -> list:
    """Canonical representatives of ``p0 + i v`` for ``i = 0..n``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    v = tuple(_num(c) for c in v)
    p0 = tuple(_num(c) for c in p0)
    if L.sqdist(v, (0,) * L.k) == 0:
        warnings.warn("translation is trivial on the torus; orbit is a single point",
                      DegenerateOrbitWarning, stacklevel=2)
    return [L.canonical(tuple(a + i * b for a, b in zip(p0, v))) for i in range(n + 1)]


def _fraction_inverse(A):
    n = len(A)
    M = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(A)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return None
        M[c], M[piv] = M[piv], M[c]
        pv = M[c][c]
        M[c] = [e / pv for e in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return [r[n:] for r in M]


# --- primes ------------------------------------------------------------------

def odd_primes_upto(n: int) -> list[int]:
    if n < 3:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, int(n ** 0.5) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return [int(p) for p in np.flatnonzero(sieve) if p != 2]


def prime_tuples(n_max: int) -> Iterator[tuple[int, ...]]:
    """Increasing tuples of distinct odd primes with product at most ``n_max``."""
    primes = odd_primes_upto(n_max)

    def rec(start, prod, acc):
        for i in range(start, len(primes)):
            p = primes[i]
            if prod * p > n_max:
                break
            t = acc + (p,)
            yield t
            yield from rec(i + 1, prod * p, t)

    yield from rec(0, 1, ())


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    return all(p % q for q in range(3, int(p ** 0.5) + 1, 2))


# --- many-gaps construction ----------------------------------------------------

@dataclass
class ManyGapsCertificate:
    primes: tuple
    N: int
    inverses: tuple
    a: tuple
    delta: tuple
    s: Fraction
    v: tuple
    sqdists: tuple  # exact dist(x_{a_j}, x_0)^2
    formula: tuple  # 1 - 2 a_j s + k (a_j s)^2
    nearest_ok: tuple
    formula_ok: tuple
    distinct_ok: bool
    nnd_count: int
    method: str
    nnd_values: tuple = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return len(self.primes)

    @property
    def passed(self) -> bool:
        return (all(self.nearest_ok) and all(self.formula_ok) and self.distinct_ok
                and self.nnd_count >= self.k)

    def to_dict(self) -> dict:
        return {
            "primes": list(self.primes),
            "N": self.N,
            "inverses": list(self.inverses),
            "a": list(self.a),
            "delta": list(self.delta),
            "s": str(self.s),
            "v": [str(c) for c in self.v],
            "sqdist": [str(c) for c in self.sqdists],
            "formula": [str(c) for c in self.formula],
            "nearest_neighbor_is_x0": list(self.nearest_ok),
            "formula_matches": list(self.formula_ok),
            "distinct": self.distinct_ok,
            "nnd_count": self.nnd_count,
            "method": self.method,
            "passed": self.passed,
        }


def _check_primes(primes) -> tuple:
    ps = tuple(int(p) for p in primes)
    if not ps:
        raise DomainError("need at least one prime")
    if len(set(ps)) != len(ps):
        raise DomainError(f"primes must be distinct: {ps}")
    for p in ps:
        if p % 2 == 0 or not _is_prime(p):
            raise DomainError(f"{p} is not an odd prime")
    return ps


def _construction_indices(ps):
    N = math.prod(ps)
    inv, a, delta = [], [], []
    for j, p in enumerate(ps):
        rest = N // p
        pi = pow(rest % p, -1, p)
        aj = max(pi, p - pi) * rest
        # (a_j, ..., a_j) reduced coordinate-wise must equal delta_j e_j
        red = [aj % q for q in ps]
        dj = None
        if all(red[i] == 0 for i in range(len(ps)) if i != j):
            if red[j] == 1:
                dj = 1
            elif red[j] == p - 1:
                dj = -1
        if dj is None or not ((N - 1) / 2 <= aj < N):
            raise CertificateFailure(j, "indices", f"a_{j} = {aj} does not reduce to +-e_{j}")
        inv.append(pi)
        a.append(aj)
        delta.append(dj)
    return N, tuple(inv), tuple(a), tuple(delta)


def many_gaps_construction(primes, s="auto", method: str = "auto") -> ManyGapsCertificate:
    """Build the prime-box torus orbit with at least ``k`` distinct NND values.

    The torus has sides ``p_1..p_k``; the step is ``v_j = 1 - s delta_j`` and the
    orbit is ``x_0..x_{N-1}`` with ``N = prod p_j``.  Every claim is checked in
    exact arithmetic: ``x_0`` is the nearest neighbour of ``x_{a_j}``, the
    squared distance matches ``1 - 2 a_j s + k (a_j s)^2``, the ``k`` distances are
    distinct, and ``|NND(X)| >= k``.

    ``method="fast"`` works with integer arrays (valid when ``s = 1/S`` with
    ``S`` large enough, which is checked); ``"exact"`` evaluates every orbit
    distance as a Fraction through the lattice metric.
    """
    ps = _check_primes(primes)
    k = len(ps)
    N, inv, a, delta = _construction_indices(ps)
    if s == "auto" or s is None:
        s = Fraction(1, 2 * k * N * N)
    s = Fraction(s)
    if not s > 0:
        raise DomainError("s must be positive")
    v = tuple(1 - s * d for d in delta)
    formula = tuple(1 - 2 * aj * s + k * (aj * s) ** 2 for aj in a)

    if method == "auto":
        method = "fast" if _fast_ok(ps, N, s) else "exact"
    if method == "fast":
        if not _fast_ok(ps, N, s):
            raise DomainError("integer path needs s = 1/S with S large enough")
        D_at, strict_min, nnd_vals = _fast_orbit(ps, N, int(1 / s), delta, a)
        sq = tuple(Fraction(q, int(1 / s) ** 2) for q in D_at)
    elif method == "exact":
        L = TorusLattice(sides=ps)
        zero = (Fraction(0),) * k
        D = [L.sqdist(tuple(m * c for c in v), zero) for m in range(1, N)]
        sq = tuple(D[aj - 1] for aj in a)
        # strict new prefix minimum at a_j
        strict_min = []
        for aj in a:
            strict_min.append(all(D[m - 1] > D[aj - 1] for m in range(1, aj)))
        spec = orbit_spectrum(D, EXACT, squared=True)
        nnd_vals = tuple(c.key for c in spec.classes)
    else:
        raise DomainError(f"unknown method {method!r}")

    formula_ok = tuple(x == f for x, f in zip(sq, formula))
    distinct_ok = len(set(sq)) == k
    cert = ManyGapsCertificate(
        primes=ps, N=N, inverses=inv, a=a, delta=delta, s=s, v=v, sqdists=sq,
        formula=formula, nearest_ok=tuple(strict_min), formula_ok=formula_ok,
        distinct_ok=distinct_ok, nnd_count=len(nnd_vals), method=method,
        nnd_values=tuple(nnd_vals),
    )
    for j in range(k):
        if not cert.nearest_ok[j]:
            raise CertificateFailure(j, "nearest", f"x_0 is not the nearest neighbour of x_{a[j]}")
        if not cert.formula_ok[j]:
            raise CertificateFailure(j, "formula", f"distance formula fails at a_{j} = {a[j]}")
    if not distinct_ok:
        raise CertificateFailure(-1, "distinct", "the k distances are not pairwise distinct")
    if cert.nnd_count < k:
        raise CertificateFailure(-1, "count", f"|NND| = {cert.nnd_count} < k = {k}")
    return cert


def _fast_ok(ps, N, s: Fraction) -> bool:
    """Conditions under which integer dominance ordering is exact.

    With ``s = 1/S`` and centred residues ``c_j`` of ``m``, the squared distance
    is ``(A S^2 + B S + C) / S^2`` with ``A = sum c_j^2``,
    ``B = -2 m sum c_j delta_j`` and ``C = k m^2``.  The coordinate-wise
    minimum image is ``c_j - m s delta_j`` when ``2N < S``, and differences in
    ``B S + C`` stay below ``S^2`` (so ``A`` decides whenever it differs) when
    ``2 (N-1) sum(p_j - 1) S + k N^2 < S^2``.
    """
    if s.numerator != 1:
        return False
    S = s.denominator
    k = len(ps)
    return 2 * N < S and 2 * (N - 1) * sum(p - 1 for p in ps) * S + k * N * N < S * S


def _fast_orbit(ps, N, S, delta, a):
    k = len(ps)
    big = sum(((p - 1) // 2) ** 2 for p in ps) >= 2 ** 31
    dt = np.int64 if big else np.int32
    m = np.arange(N, dtype=np.int64)
    A = np.zeros(N, dtype=dt)
    for p in ps:
        r = np.arange(p, dtype=np.int64)
        c = np.where(r > p // 2, r - p, r)
        A += np.broadcast_to((c * c).astype(dt), (N // p, p)).ravel()
    A[0] = np.iinfo(dt).max  # m = 0 is the point itself
    PA = np.minimum.accumulate(A)
    cand = np.flatnonzero(A == PA)
    cand = cand[cand >= 1]

    def key(mm: int) -> int:
        cs = []
        for p in ps:
            r = mm % p
            cs.append(r - p if r > p // 2 else r)
        Aq = sum(c * c for c in cs)
        B = -2 * mm * sum(c * d for c, d in zip(cs, delta))
        C = k * mm * mm
        return Aq * S * S + B * S + C

    # exact prefix minima restricted to candidates
    pm_pos, pm_val = [], []
    cur = None
    for mm in cand.tolist():
        q = key(mm)
        if cur is None or q < cur:
            cur = q
            pm_pos.append(mm)
            pm_val.append(q)
    strict = []
    D_at = []
    for aj in a:
        q = key(aj)
        D_at.append(q)
        strict.append(aj in pm_pos and pm_val[pm_pos.index(aj)] == q
                      and (pm_pos.index(aj) == 0 or pm_val[pm_pos.index(aj) - 1] > q))
    # spectrum: prefix minimum at M for M in [ceil((N-1)/2), N-1]
    n = N - 1
    M0 = (n + 1) // 2
    idx = np.searchsorted(np.array(pm_pos), M0, side="right") - 1
    vals = [pm_val[idx]] + [q for pos, q in zip(pm_pos, pm_val) if M0 < pos <= n]
    return D_at, strict, tuple(Fraction(q, S * S) for q in sorted(set(vals)))


# --- flat Klein bottle -------------------------------------------------------

class KleinQuotient:
    """Plane modulo ``g_{a,b}(x, y) = (x + a w, (-1)^a y + b h)``."""

    def __init__(self, w=1, h=1):
        self.w = _num(w)
        self.h = _num(h)
        if not (self.w > 0 and self.h > 0):
            raise DomainError("w and h must be positive")

    def act(self, a: int, b: int, p):
        x, y = p
        return (x + a * self.w, (y if a % 2 == 0 else -y) + b * self.h)

    def canonical(self, p) -> tuple:
        x, y = (_num(c) for c in p)
        a = _floor(x / self.w)
        x, y = self.act(-a, 0, (x, y))
        y = y - _floor(y / self.h) * self.h
        return (x, y)

    def sqdist(self, p, q):
        """Squared distance, enumerating group elements within reach."""
        p = self.canonical(p)
        q = self.canonical(q)

        def best_for(a):
            x, y = self.act(a, 0, q)
            dx = x - p[0]
            b0 = round((p[1] - y) / self.h)
            out = None
            for b in (b0 - 1, b0, b0 + 1):
                dy = y + b * self.h - p[1]
                val = dx * dx + dy * dy
                if out is None or val < out:
                    out = val
            return out

        best = min(best_for(a) for a in (-1, 0, 1))
        R = math.ceil(math.sqrt(best) / float(min(self.w, self.h))) + 1
        for a in range(-R, R + 1):
            val = best_for(a)
            if val < best:
                best = val
        return best

    def distance(self, p, q) -> float:
        return math.sqrt(self.sqdist(p, q))


@dataclass(frozen=True)
class KleinCrossing:
    s: Fraction  # parameters in units of arc length scaled by |d| (see tau_scale)
    t: Fraction
    location: tuple
    cos_angle: Fraction
    group: tuple

    def angle(self) -> float:
        return math.acos(float(self.cos_angle))


def _parse_slope(slope):
    if isinstance(slope, str):
        if slope.strip().lower() in ("inf", "vertical"):
            return 1, 0
        num, _, den = slope.partition("/")
        P, Q = int(num), int(den or 1)
    else:
        P, Q = slope
    if P == 0 and Q == 0:
        raise DomainError("slope direction is zero")
    g = math.gcd(P, Q)
    P, Q = P // g, Q // g
    if Q < 0 or (Q == 0 and P < 0):
        P, Q = -P, -Q
    return P, Q


def klein_geodesic_intersections(K: KleinQuotient, slope, length, start=(0, 0)):
    """Transverse self-intersections of the geodesic ``start + t d``, ``0 < t < length``.

    ``slope`` is ``"P/Q"`` (direction ``d = (Q, P)``).  Returns
    ``(crossings, overlaps, multiplicities)``.  Crossing parameters ``s < t``
    are arc lengths divided by ``|d|`` so they stay rational; multiply by
    ``|d|`` for arc length.  ``overlaps`` lists group elements under which the
    geodesic runs along itself.
    """
    P, Q = _parse_slope(slope)
    L = _num(length)
    if not L > 0:
        raise DomainError("length must be positive")
    x0, y0 = (_num(c) for c in start)
    w, h = K.w, K.h
    n2 = P * P + Q * Q
    tmax2 = L * L / n2  # bound on tau^2
    tmax = math.sqrt(tmax2) + 1

    def inside(tau):
        return tau > 0 and tau * tau < tmax2

    crossings = []
    transverse = P != 0 and Q != 0
    amax = int(tmax * abs(Q) / float(w)) + 2 if Q else 0
    for a in range(-amax, amax + 1):
        odd = a % 2 != 0
        if not odd or not transverse:
            # image direction is parallel: only coincidence of whole lines
            continue
        # (t1 - t2) Q = a w ; (t1 + t2) P = b h - 2 y0
        diff = a * w / Q
        if not diff > 0:
            continue
        bmin = math.floor((min(0.0, 2 * tmax * P) + 2 * float(y0)) / float(h)) - 1
        bmax = math.ceil((max(0.0, 2 * tmax * P) + 2 * float(y0)) / float(h)) + 1
        for b in range(bmin, bmax + 1):
            ssum = (b * h - 2 * y0) / P
            t1 = (ssum + diff) / 2
            t2 = (ssum - diff) / 2
            if inside(t1) and inside(t2):
                loc = K.canonical((x0 + t2 * Q, y0 + t2 * P))
                crossings.append(
                    KleinCrossing(t2, t1, loc, Fraction(Q * Q - P * P, n2), (a, b))
                )
    # overlaps: g maps the line to itself
    overlaps = _klein_overlaps(K, P, Q, x0, y0, tmax2)
    crossings.sort(key=lambda c: (c.s, c.t))
    mult: dict = {}
    for c in crossings:
        mult[c.location] = mult.get(c.location, 0) + 1
    return crossings, overlaps, mult


def _klein_overlaps(K, P, Q, x0, y0, tmax2):
    """Group elements (a, b) != id carrying a point of the segment back onto it."""
    out = []
    w, h = K.w, K.h
    tmax = math.sqrt(tmax2) + 1
    amax = int(tmax * abs(Q) / float(w)) + 2
    bmax = int(2 * tmax * abs(P) / float(h) + 2 * abs(float(y0)) / float(h)) + 2
    for a in range(-amax, amax + 1):
        for b in range(-bmax, bmax + 1):
            if a == 0 and b == 0:
                continue
            odd = a % 2 != 0
            # image direction (Q, +-P) must be parallel to (Q, P)
            if odd and P != 0 and Q != 0:
                continue
            # g(start + t2 d) = start + t1 d for some t1, t2 in the segment
            if not odd:
                vx, vy = a * w, b * h
                if vx * P != vy * Q:
                    continue
                shift = vx / Q if Q else vy / P
                if shift > 0 and shift * shift < tmax2:
                    out.append((a, b))
            else:
                if P == 0:
                    # horizontal: y0 -> -y0 + b h must equal y0
                    if -y0 + b * h == y0:
                        shift = a * w / Q
                        if shift > 0 and shift * shift < tmax2:
                            out.append((a, b))
                # vertical lines: x shifts by a w != 0, never coincide
    return out


def klein_embed(K: KleinQuotient, pts, R: float = 2.0, r: float = 1.0) -> np.ndarray:
    """Embed Klein-bottle points in R^4 (an injective immersion of the quotient)."""
    pts = np.asarray(pts, dtype=float)
    phi = 2 * np.pi * pts[:, 0] / float(K.w)
    th = 2 * np.pi * pts[:, 1] / float(K.h)
    rad = R + r * np.cos(th)
    return np.stack(
        [rad * np.cos(phi), rad * np.sin(phi), r * np.sin(th) * np.cos(phi / 2),
         r * np.sin(th) * np.sin(phi / 2)],
        axis=1,
    )


def klein_curve(K: KleinQuotient, slope, length, start=(0, 0), h: float = 1e-3,
                R: float = 2.0, r: float = 1.0):
    """The geodesic ``start + t u`` (``u`` the unit direction) embedded in R^4.

    Returns a :class:`~gapscope.geodesic.intersections.Curve` parameterised by
    flat arc length, with velocities from the chain rule.
    """
    from .geodesic.intersections import Curve

    P, Q = _parse_slope(slope)
    nrm = math.hypot(P, Q)
    ux, uy = Q / nrm, P / nrm
    L = float(length)
    n = max(1, math.ceil(L / h - 1e-9))
    t = np.linspace(0.0, L, n + 1)
    x0, y0 = float(start[0]), float(start[1])
    pts = np.column_stack([x0 + t * ux, y0 + t * uy])
    pos = klein_embed(K, pts, R, r)
    w, hh = float(K.w), float(K.h)
    phi = 2 * np.pi * pts[:, 0] / w
    th = 2 * np.pi * pts[:, 1] / hh
    dphi = 2 * np.pi * ux / w
    dth = 2 * np.pi * uy / hh
    rad = R + r * np.cos(th)
    vel = np.column_stack([
        -r * np.sin(th) * dth * np.cos(phi) - rad * np.sin(phi) * dphi,
        -r * np.sin(th) * dth * np.sin(phi) + rad * np.cos(phi) * dphi,
        r * np.cos(th) * dth * np.cos(phi / 2) - r * np.sin(th) * np.sin(phi / 2) * dphi / 2,
        r * np.cos(th) * dth * np.sin(phi / 2) + r * np.sin(th) * np.cos(phi / 2) * dphi / 2,
    ])
    return Curve(t, pos, vel, L / n)
