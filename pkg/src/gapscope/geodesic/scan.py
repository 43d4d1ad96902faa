"""NND spectra of equally spaced geodesic samples on surfaces.

For each sample the nearest neighbour is found best-first: candidates are
visited in increasing chordal distance and refined by shooting until the next
chordal distance (a lower bound) exceeds the best refined value.  Samples
adjacent along the geodesic are exactly ``T`` apart whenever ``T`` is below
the surface's injectivity-radius bound, and are then taken without shooting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, ShootingWarning
from ..nnd import ClusterPolicy, NndSpectrum, make_spectrum
from .distance import intrinsic_distance
from .integrate import integrate_geodesic, sample_geodesic
from .surfaces import ImplicitSurface

__all__ = [
    "GeodesicConfig",
    "PairCache",
    "geodesic_nnd_spectrum",
    "bgc_scan",
    "isolated_point_diagnostic",
    "random_configs",
]


@dataclass(frozen=True)
class GeodesicConfig:
    x0: tuple
    v0: tuple
    config_id: int = 0


@dataclass
class PairCache:
    """Refined distances keyed by sample index pairs ``(i, j)``, ``i < j``."""

    values: dict = field(default_factory=dict)
    refined: int = 0
    fallbacks: int = 0

    def get(self, S, P, i, j, T):
        key = (i, j) if i < j else (j, i)
        if key not in self.values:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ShootingWarning)
                d = intrinsic_distance(S, P[key[0]], P[key[1]])
            self.refined += 1
            if d.method != "refined":
                self.fallbacks += 1
            self.values[key] = d.value
            del caught
        return self.values[key]


def geodesic_nnd_spectrum(S: ImplicitSurface, P: np.ndarray, T: float,
                          policy: ClusterPolicy | None = None,
                          cache: PairCache | None = None) -> NndSpectrum:
    """Spectrum of the samples ``P[0..n]`` spaced ``T`` along one geodesic."""
    P = np.asarray(P, dtype=float)
    n1 = len(P)
    if n1 < 2:
        raise DomainError("need at least two samples")
    cache = cache if cache is not None else PairCache()
    adjacent_exact = T < S.injectivity_bound()
    sq = np.einsum("ij,ij->i", P, P)
    keys, nbrs = [], []
    for i in range(n1):
        d2 = sq + sq[i] - 2.0 * (P @ P[i])
        chord = np.sqrt(np.maximum(d2, 0.0))
        chord[i] = np.inf
        best, arg = math.inf, -1
        if adjacent_exact:
            for j in (i - 1, i + 1):
                if 0 <= j < n1 and (T < best or (T == best and j < arg)):
                    best, arg = T, j
        order = np.argsort(chord, kind="stable")
        for j in order:
            j = int(j)
            if chord[j] > best * (1 + 1e-12):
                break
            if adjacent_exact and abs(i - j) == 1:
                continue
            d = cache.get(S, P, i, j, T)
            if d < best or (d == best and j < arg):
                best, arg = d, j
        keys.append(best)
        nbrs.append(arg)
    return make_spectrum(keys, nbrs, policy or ClusterPolicy(), False)


def random_configs(S: ImplicitSurface, count: int, seed: int = 0) -> list[GeodesicConfig]:
    """Random start points (projected Gaussian) with random unit tangents."""
    rng = np.random.default_rng(seed)
    out = []
    for cid in range(count):
        x = rng.standard_normal(3)
        x = np.array(S.project(*(x / np.linalg.norm(x)), iters=50))
        e1, e2 = S.tangent_basis(x)
        a = rng.uniform(0, 2 * math.pi)
        v = math.cos(a) * e1 + math.sin(a) * e2
        out.append(GeodesicConfig(tuple(x), tuple(v / np.linalg.norm(v)), cid))
    return out


def bgc_scan(S: ImplicitSurface, configs, T_grid, n_grid, h: float = 1e-3,
             policy: ClusterPolicy | None = None):
    """``|NND|`` of ``{gamma(iT) : i = 0..n}`` over configs, ``T`` and ``n``.

    Returns ``(rows, growth)``: rows are dicts with keys config_id, T, n,
    nnd_count, refined_pairs, warnings; ``growth`` maps each ``n`` to the
    maximum count over all configs and steps.
    """
    n_grid = sorted(int(n) for n in n_grid)
    rows = []
    for cfg in configs:
        for T in T_grid:
            T = float(T)
            traj = integrate_geodesic(S, cfg.x0, cfg.v0, n_grid[-1] * T, h)
            P = sample_geodesic(traj, T, n_grid[-1])
            cache = PairCache()
            for n in n_grid:
                before, fb = cache.refined, cache.fallbacks
                spec = geodesic_nnd_spectrum(S, P[: n + 1], T, policy, cache)
                rows.append({
                    "config_id": cfg.config_id,
                    "T": T,
                    "n": n,
                    "nnd_count": spec.count,
                    "refined_pairs": cache.refined - before,
                    "warnings": cache.fallbacks - fb,
                })
    growth = {}
    for r in rows:
        growth[r["n"]] = max(growth.get(r["n"], 0), r["nnd_count"])
    return rows, growth


def isolated_point_diagnostic(samples, delta: float, pairwise=None) -> np.ndarray:
    """Number of ``delta``-isolated points in each prefix ``samples[:m]``, ``m >= 2``.

    A point is isolated when its nearest neighbour within the prefix is
    farther than ``delta``.  ``pairwise(a, B)`` returns distances from one
    point to many (Euclidean by default).  Entry ``m - 2`` of the result
    belongs to the prefix of length ``m``.
    """
    X = np.asarray(samples, dtype=float)
    if len(X) < 2:
        raise DomainError("need at least two samples")
    if X.ndim == 1:
        X = X[:, None]
    if pairwise is None:
        def pairwise(a, B):
            return np.linalg.norm(B - a, axis=1)
    nn = np.full(len(X), np.inf)
    out = np.empty(len(X) - 1, dtype=np.int64)
    for m in range(1, len(X)):
        d = np.asarray(pairwise(X[m], X[:m]), dtype=float).reshape(m)
        nn[:m] = np.minimum(nn[:m], d)
        nn[m] = d.min()
        out[m - 1] = int(np.count_nonzero(nn[: m + 1] > delta))
    return out
