"""Certified packings of open balls in model spaces.

A packing of ``B(c, r)`` is a set of points inside the open ball that are
pairwise at least ``r`` apart.  Greedy random search gives certified lower
bounds for the packing number; verification is exact for points in
Euclidean space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError
from .spaces import Euclidean, Hyperbolic, ProjectiveSpace, Sphere, exp_map

BOUNDARY_TOL = 1e-12

__all__ = [
    "PackingCertificate",
    "PackingResult",
    "verify_packing",
    "greedy_packing",
    "sample_ball",
    "euclidean_packing_bound",
    "hyperbolic_monotonicity_scan",
    "nnd_bound_from_packing",
    "default_center",
]


@dataclass
class PackingCertificate:
    ok: bool
    violation: dict | None = None
    boundary: list = field(default_factory=list)
    min_pair: float = math.inf
    max_center: float = 0.0

    def __bool__(self):
        return self.ok


@dataclass
class PackingResult:
    space: object
    r: float
    center: object
    points: list
    trials: int
    seed: int
    certificate: PackingCertificate

    @property
    def count(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        S = self.space
        D = _pairwise(S, self.points)
        return {
            "space": repr(S),
            "r": self.r,
            "center": [float(c) for c in np.ravel(self.center)],
            "count": self.count,
            "points": [[float(c) for c in np.ravel(p)] for p in self.points],
            "pairwise": D.tolist(),
            "center_distances": [float(S.distance(self.center, p)) for p in self.points],
            "verified": self.certificate.ok,
            "boundary_pairs": self.certificate.boundary,
            "trials": self.trials,
            "seed": self.seed,
        }


def default_center(S):
    if isinstance(S, Euclidean):
        return np.zeros(S.k)
    if isinstance(S, Hyperbolic):
        return S.origin()
    if isinstance(S, (Sphere, ProjectiveSpace)):
        c = np.zeros(S.k + 1)
        c[-1] = 1.0
        return c
    raise DomainError(f"no packing support for {S!r}")


def _pairwise(S, pts):
    if len(pts) == 0:
        return np.zeros((0, 0))
    return S.pairwise(np.array([np.asarray(p, dtype=float) for p in pts]))


def verify_packing(S, center, r, points) -> PackingCertificate:
    """Check the packing conditions; exact in Euclidean space.

    Returns a certificate whose ``violation`` describes the first failing
    condition (centre distances checked first, then pairs in index order).
    Floating pairs within ``1e-12`` below ``r`` are accepted but listed as
    boundary cases.
    """
    points = list(points)
    if not points:
        raise DomainError("points must be nonempty")
    if isinstance(S, Euclidean):
        # binary floats are rationals, so Euclidean checks are always exact
        r2 = Fraction(r) ** 2
        points = [tuple(Fraction(c) for c in np.ravel(np.asarray(p, dtype=object))) for p in points]
        center = tuple(Fraction(c) for c in np.ravel(np.asarray(center, dtype=object)))

        def sq(a, b):
            return sum((Fraction(x) - Fraction(y)) ** 2 for x, y in zip(a, b))

        worst_c = 0
        for i, p in enumerate(points):
            d = sq(p, center)
            worst_c = max(worst_c, d)
            if not d < r2:
                return PackingCertificate(False, {"kind": "center", "i": i, "sqdist": str(d)})
        best = None
        for i in range(len(points)):
            for j in range(i + 1, len(points)):
                d = sq(points[i], points[j])
                best = d if best is None else min(best, d)
                if d < r2:
                    return PackingCertificate(False, {"kind": "pair", "i": i, "j": j, "sqdist": str(d)})
        return PackingCertificate(True, None, [], math.sqrt(best) if best is not None else math.inf,
                                  math.sqrt(worst_c))

    r = float(r)
    dc = [S.distance(center, p) for p in points]
    for i, d in enumerate(dc):
        if not d < r:
            return PackingCertificate(False, {"kind": "center", "i": i, "dist": d})
    D = _pairwise(S, points)
    boundary = []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if D[i, j] < r - BOUNDARY_TOL:
                return PackingCertificate(False, {"kind": "pair", "i": i, "j": j, "dist": float(D[i, j])})
            if D[i, j] < r:
                boundary.append((i, j))
    off = D[np.triu_indices(len(points), 1)]
    return PackingCertificate(True, None, boundary, float(off.min()) if off.size else math.inf,
                              float(max(dc)))


# --- sampling inside balls --------------------------------------------------------

def _orthonormal_tangent(S, c):
    """Columns spanning the tangent space at ``c`` (orthonormal for the metric)."""
    dim = len(c)
    if isinstance(S, Hyperbolic):
        J = np.diag([-1.0] + [1.0] * (dim - 1))
        basis = []
        for e in np.eye(dim)[1:] if abs(c[0] - S.R) < 1e-15 else np.eye(dim):
            v = e + S.kappa * (e @ J @ c) * c  # project: v - <v,c>_L c / <c,c>_L
            for b in basis:
                v = v - (v @ J @ b) * b
            n2 = v @ J @ v
            if n2 > 1e-12:
                basis.append(v / math.sqrt(n2))
            if len(basis) == dim - 1:
                break
        return np.array(basis).T
    basis = []
    for e in np.eye(dim):
        v = e - (e @ c) * c
        for b in basis:
            v = v - (v @ b) * b
        n = np.linalg.norm(v)
        if n > 1e-8:
            basis.append(v / n)
        if len(basis) == dim - 1:
            break
    return np.array(basis).T


def _sample_radius(S, r, m, rng):
    """Geodesic radii distributed as the volume measure within ``B(c, r)``."""
    k = S.k
    u = rng.random(m)
    if isinstance(S, Euclidean):
        return r * u ** (1.0 / k)
    if isinstance(S, (Sphere, ProjectiveSpace)):
        if k == 2:
            return np.arccos(1.0 - u * (1.0 - math.cos(r)))
        dens = lambda t: np.sin(t) ** (k - 1)  # noqa: E731
        top = 1.0 if r >= math.pi / 2 else math.sin(r) ** (k - 1)
    else:
        R = S.R
        if k == 2:
            return R * np.arccosh(1.0 + u * (math.cosh(r / R) - 1.0))
        dens = lambda t: np.sinh(t / R) ** (k - 1)  # noqa: E731
        top = math.sinh(r / R) ** (k - 1)
    out = np.empty(0)
    while out.size < m:
        t = r * rng.random(2 * m)
        acc = rng.random(2 * m) * top <= dens(t)
        out = np.concatenate([out, t[acc]])
    return out[:m]


def sample_ball(S, center, r, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` volume-uniform points in the open ball ``B(center, r)``."""
    center = np.asarray(center, dtype=float)
    if isinstance(S, Euclidean):
        out = np.empty((0, S.k))
        while len(out) < m:
            box = rng.uniform(-r, r, size=(2 * m + 8, S.k))
            box = box[np.einsum("ij,ij->i", box, box) < r * r]
            out = np.concatenate([out, box])
        return center + out[:m]
    rho = _sample_radius(S, r, m, rng)
    E = _orthonormal_tangent(S, center)
    dirs = rng.standard_normal((m, S.k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    U = dirs @ E.T  # unit tangent directions at the centre
    if isinstance(S, Hyperbolic):
        a = rho / S.R
        pts = np.cosh(a)[:, None] * center + (S.R * np.sinh(a))[:, None] * U
    else:
        pts = np.cos(rho)[:, None] * center + np.sin(rho)[:, None] * U
    if isinstance(S, ProjectiveSpace):
        pts = np.array([ProjectiveSpace.canonical(p) for p in pts])
    return pts


# --- greedy search ---------------------------------------------------------------

def _greedy_run(S, center, r, rng, batch, patience, start=()):
    """Greedy insertion of volume-uniform candidates until ``patience`` idle batches.

    Candidates within a relative ``1e-12`` of either bound are skipped so the
    result passes exact verification as well.
    """
    lo, hi = r * (1 + 1e-12), r * (1 - 1e-12)
    acc = [np.asarray(p, dtype=float) for p in start]
    idle = 0
    while idle < patience:
        cand = sample_ball(S, center, r, batch, rng)
        ok = S.cross(center[None, :], cand)[0] < hi
        if acc:
            ok &= np.all(S.cross(cand, np.array(acc)) >= lo, axis=1)
        added = False
        idx = np.flatnonzero(ok)
        if idx.size:
            # only candidates that survived so far can still be accepted
            alive = np.ones(idx.size, dtype=bool)
            Dcc = S.pairwise(cand[idx])
            for a in range(idx.size):
                if not alive[a]:
                    continue
                acc.append(cand[idx[a]])
                added = True
                alive &= Dcc[a] >= lo
        idle = 0 if added else idle + 1
    return acc


def _cert_key(points):
    return tuple(sorted(tuple(np.round(np.asarray(p, dtype=float), 15)) for p in points))


def greedy_packing(S, center=None, r: float = 1.0, trials: int = 100, seed: int = 0,
                   batch: int = 256, patience: int = 4) -> PackingResult:
    """Best of ``trials`` independent greedy runs; always passes verification.

    Each trial draws from its own child of ``SeedSequence(seed)`` so the
    result does not depend on the order trials are evaluated in.  Ties in
    count go to the lexicographically smallest sorted point list.
    """
    if not r > 0:
        raise DomainError("r must be positive")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    center = default_center(S) if center is None else np.asarray(center, dtype=float)
    children = np.random.SeedSequence(seed).spawn(trials)
    best = None
    best_key = None
    for ss in children:
        pts = _greedy_run(S, center, r, np.random.default_rng(ss), batch, patience)
        if not pts:
            pts = [center.copy()]
        key = (-len(pts), _cert_key(pts))
        if best is None or key < best_key:
            best, best_key = pts, key
    cert = verify_packing(S, center, r, best)
    if not cert.ok:  # pragma: no cover - greedy acceptance enforces the conditions
        raise AssertionError(f"greedy packing failed verification: {cert.violation}")
    return PackingResult(S, r, center, best, trials, seed, cert)


def euclidean_packing_bound(k: int) -> int:
    """Volume bound: ``n`` disjoint ``r/2``-balls fit inside a ``3r/2``-ball, so ``n <= 3^k``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    return 3 ** k


def nnd_bound_from_packing(P: int) -> int:
    if P < 1:
        raise DomainError("packing number must be >= 1")
    return P + 1


def _rescale(S, center, pts, factor):
    """Scale geodesic distances from ``center`` by ``factor`` along radial geodesics."""
    out = []
    R = S.R
    for p in pts:
        # log map at the centre
        q = -(p[0] * center[0]) + p[1:] @ center[1:]  # <p, c>_L
        ch = q * S.kappa  # cosh(d / R)
        d = R * math.acosh(max(ch, 1.0))
        if d == 0:
            out.append(center.copy())
            continue
        w = p - ch * center
        J = np.diag([-1.0] + [1.0] * (len(p) - 1))
        w = w / math.sqrt(max(w @ J @ w, 1e-300)) * d
        out.append(exp_map(S, center, factor * w))
    return out


def hyperbolic_monotonicity_scan(kappa: float, k: int, radii: Sequence[float], trials: int = 20,
                                 seed: int = 0):
    """Greedy packing counts of ``H^k_kappa`` at increasing radii.

    The best certificate at radius ``r_i`` is pushed radially by
    ``r_{i+1}/r_i``; in a space of nonpositive curvature this keeps points
    inside the larger ball and at least ``r_{i+1}`` apart, so it seeds the
    next search and the reported counts cannot decrease.
    """
    if not kappa < 0:
        raise DomainError("kappa must be negative")
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be strictly increasing")
    S = Hyperbolic(k, kappa)
    c = S.origin()
    out = []
    prev = None
    for i, r in enumerate(radii):
        res = greedy_packing(S, c, r, trials=trials, seed=seed + i)
        if prev is not None:
            seeded = _rescale(S, c, prev.points, r / prev.r)
            seeded = _extend(S, c, r, seeded, np.random.default_rng([seed, i]))
            cert = verify_packing(S, c, r, seeded)
            if cert.ok and len(seeded) > res.count:
                res = PackingResult(S, r, c, seeded, trials, seed, cert)
        out.append(res)
        prev = res
    return out


def _extend(S, c, r, pts, rng, batch=256, patience=4):
    return _greedy_run(S, c, r, rng, batch, patience, start=pts)
