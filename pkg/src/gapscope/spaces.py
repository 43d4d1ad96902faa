"""Constant-curvature model spaces, their products, and isometry orbits.

Points are numpy vectors: unit vectors in R^{k+1} for spheres and projective
spaces, hyperboloid points for hyperbolic space (``<x,x>_L = 1/kappa``,
``x_0 > 0``), plain vectors for Euclidean space and flat tori, and tuples of
factor points for products.  Distances use formulas that stay accurate for
nearby points (no arccos of a number close to one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateOrbitError, DomainError, BoundViolation
from .flat import TorusLattice
from .nnd import ClusterPolicy, EXACT, MetricOracle, NndSpectrum, make_spectrum, orbit_spectrum

NORM_TOL = 1e-12

__all__ = [
    "Sphere",
    "ProjectiveSpace",
    "Euclidean",
    "Hyperbolic",
    "FlatTorusSpace",
    "ProductSpace",
    "LinearIsometry",
    "RigidMotion",
    "TorusTranslation",
    "ProductIsometry",
    "model_distance",
    "geodesic_involution",
    "exp_map",
    "transvection",
    "rotation_transvection",
    "random_rotation",
    "isometry_orbit",
    "isometry_orbit_spectrum",
    "product_space",
    "product_transvection",
    "nonnegatively_curved",
    "orbit_nnd_ceiling",
    "parse_space",
]


def _minkowski(x, y):
    return -x[..., 0] * y[..., 0] + np.einsum("...i,...i->...", x[..., 1:], y[..., 1:])


class _Space:
    k: int
    ambient: int

    def validate(self, x):
        return np.asarray(x, dtype=float)

    def distance(self, x, y) -> float:
        raise NotImplementedError

    def pairwise(self, X) -> np.ndarray:
        X = [self.validate(x) for x in X]
        n = len(X)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = self.distance(X[i], X[j])
        return D

    def oracle(self) -> MetricOracle:
        return MetricOracle(self.distance, exact=False, err=1e-13, pairwise=self.pairwise)


@dataclass(frozen=True)
class Sphere(_Space):
    k: int = 2
    radius: float = 1.0
    curvature_sign = 1

    @property
    def ambient(self):
        return self.k + 1

    def validate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.k + 1:
            raise DomainError(f"sphere point needs {self.k + 1} coordinates")
        if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > NORM_TOL):
            raise DomainError("sphere point is not a unit vector")
        return x

    @staticmethod
    def _angle(x, y):
        return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))

    def distance(self, x, y) -> float:
        return float(self.radius * self._angle(self.validate(x), self.validate(y)))

    def cross(self, X, Y):
        A = self.validate(np.asarray(X, dtype=float))
        B = self.validate(np.asarray(Y, dtype=float))
        return self.radius * self._angle(A[:, None, :], B[None, :, :])

    def pairwise(self, X):
        return self.cross(X, X)


@dataclass(frozen=True)
class ProjectiveSpace(_Space):
    k: int = 2
    curvature_sign = 1

    @property
    def ambient(self):
        return self.k + 1

    def validate(self, x):
        return Sphere(self.k).validate(x)

    @staticmethod
    def canonical(x):
        x = np.array(x, dtype=float)
        nz = np.flatnonzero(np.abs(x) > 0)
        if nz.size and x[nz[0]] < 0:
            x = -x
        return x

    def distance(self, x, y) -> float:
        th = float(Sphere._angle(self.validate(x), self.validate(y)))
        return min(th, math.pi - th)

    def cross(self, X, Y):
        A = self.validate(np.asarray(X, dtype=float))
        B = self.validate(np.asarray(Y, dtype=float))
        th = Sphere._angle(A[:, None, :], B[None, :, :])
        return np.minimum(th, np.pi - th)

    def pairwise(self, X):
        return self.cross(X, X)


@dataclass(frozen=True)
class Euclidean(_Space):
    k: int = 2
    curvature_sign = 0

    @property
    def ambient(self):
        return self.k

    def validate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.k:
            raise DomainError(f"Euclidean point needs {self.k} coordinates")
        return x

    def distance(self, x, y) -> float:
        return float(np.linalg.norm(self.validate(x) - self.validate(y)))

    def cross(self, X, Y):
        A = self.validate(np.asarray(X, dtype=float))
        B = self.validate(np.asarray(Y, dtype=float))
        return np.linalg.norm(A[:, None, :] - B[None, :, :], axis=-1)

    def pairwise(self, X):
        return self.cross(X, X)


@dataclass(frozen=True)
class Hyperbolic(_Space):
    """Hyperboloid model of curvature ``kappa < 0``."""

    k: int = 2
    kappa: float = -1.0
    curvature_sign = -1

    def __post_init__(self):
        if not self.kappa < 0:
            raise DomainError("hyperbolic space needs kappa < 0")

    @property
    def ambient(self):
        return self.k + 1

    @property
    def R(self) -> float:
        return 1.0 / math.sqrt(-self.kappa)

    def origin(self):
        o = np.zeros(self.k + 1)
        o[0] = self.R
        return o

    def validate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.k + 1:
            raise DomainError(f"hyperboloid point needs {self.k + 1} coordinates")
        q = _minkowski(x, x)
        scale = np.maximum(1.0, np.abs(x[..., 0]) ** 2)
        if np.any(np.abs(q - 1.0 / self.kappa) > NORM_TOL * scale * max(1.0, self.R ** 2)):
            raise DomainError("point is not on the hyperboloid")
        if np.any(x[..., 0] <= 0):
            raise DomainError("point is on the lower sheet")
        return x

    def _dist(self, x, y):
        d = x - y
        q = np.maximum(_minkowski(d, d), 0.0)
        return 2.0 * self.R * np.arcsinh(np.sqrt(q) / (2.0 * self.R))

    def distance(self, x, y) -> float:
        return float(self._dist(self.validate(x), self.validate(y)))

    def cross(self, X, Y):
        A = self.validate(np.asarray(X, dtype=float))
        B = self.validate(np.asarray(Y, dtype=float))
        return self._dist(A[:, None, :], B[None, :, :])

    def pairwise(self, X):
        return self.cross(X, X)


class FlatTorusSpace(_Space):
    curvature_sign = 0

    def __init__(self, lattice: TorusLattice):
        self.lattice = lattice
        self.k = lattice.k
        self.ambient = lattice.k

    def __repr__(self):
        return f"FlatTorusSpace({self.lattice!r})"

    def validate(self, x):
        if len(x) != self.k:
            raise DomainError(f"torus point needs {self.k} coordinates")
        return x

    def distance(self, x, y) -> float:
        return math.sqrt(self.lattice.sqdist(x, y))

    def pairwise(self, X):
        L = self.lattice
        if L.rectangular:
            sides = np.array([float(s) for s in L.sides])
            A = np.array([[float(c) for c in x] for x in X])
            d = np.abs(A[:, None, :] - A[None, :, :]) % sides
            d = np.minimum(d, sides - d)
            return np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        return super().pairwise(X)

    def oracle(self) -> MetricOracle:
        if self.lattice.exact:
            return MetricOracle(self.lattice.sqdist, exact=True, squared=True)
        return super().oracle()


class ProductSpace(_Space):
    def __init__(self, factors: Sequence[_Space]):
        self.factors = tuple(factors)
        if not self.factors:
            raise DomainError("empty product")
        self.k = sum(f.k for f in self.factors)
        self.curvature_sign = min(getattr(f, "curvature_sign", 0) for f in self.factors)

    def __repr__(self):
        return f"ProductSpace({list(self.factors)!r})"

    def validate(self, x):
        if len(x) != len(self.factors):
            raise DomainError("product point has the wrong number of factors")
        return tuple(f.validate(xi) for f, xi in zip(self.factors, x))

    def distance(self, x, y) -> float:
        return math.sqrt(sum(f.distance(a, b) ** 2 for f, a, b in zip(self.factors, x, y)))

    def pairwise(self, X):
        D2 = None
        for j, f in enumerate(self.factors):
            Dj = f.pairwise([x[j] for x in X])
            D2 = Dj * Dj if D2 is None else D2 + Dj * Dj
        return np.sqrt(D2)


def product_space(S1, S2, *more) -> ProductSpace:
    fs = []
    for S in (S1, S2) + more:
        fs.extend(S.factors if isinstance(S, ProductSpace) else [S])
    return ProductSpace(fs)


def model_distance(S, x, y) -> float:
    return S.distance(x, y)


def nonnegatively_curved(S) -> bool:
    return getattr(S, "curvature_sign", 0) >= 0


def orbit_nnd_ceiling(S) -> int:
    """``3^k + 1`` for a nonnegatively curved space of dimension ``k``."""
    if not nonnegatively_curved(S):
        raise DomainError("the 3^k + 1 ceiling needs nonnegative curvature")
    return 3 ** S.k + 1


# --- isometries ----------------------------------------------------------------

class LinearIsometry:
    """``x -> M x`` on a sphere, projective space or hyperboloid."""

    def __init__(self, space, M):
        self.space = space
        self.M = np.asarray(M, dtype=float)

    def __call__(self, x):
        y = self.M @ np.asarray(x, dtype=float)
        if isinstance(self.space, ProjectiveSpace):
            y = ProjectiveSpace.canonical(y)
        return y

    def __matmul__(self, other: "LinearIsometry") -> "LinearIsometry":
        return LinearIsometry(self.space, self.M @ other.M)

    def form_defect(self) -> float:
        """How far ``M`` is from preserving the relevant bilinear form."""
        M = self.M
        if isinstance(self.space, Hyperbolic):
            J = np.diag([-1.0] + [1.0] * (M.shape[0] - 1))
            return float(np.max(np.abs(M.T @ J @ M - J)))
        return float(np.max(np.abs(M.T @ M - np.eye(M.shape[0]))))


class RigidMotion:
    """``x -> Q x + b`` on Euclidean space."""

    def __init__(self, space, Q, b):
        self.space = space
        self.Q = np.asarray(Q, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def __call__(self, x):
        return self.Q @ np.asarray(x, dtype=float) + self.b

    def __matmul__(self, other: "RigidMotion") -> "RigidMotion":
        return RigidMotion(self.space, self.Q @ other.Q, self.Q @ other.b + self.b)

    def form_defect(self) -> float:
        return float(np.max(np.abs(self.Q.T @ self.Q - np.eye(self.Q.shape[0]))))


class TorusTranslation:
    """Translation by ``v`` on a flat torus; exact for rational input."""

    def __init__(self, space: FlatTorusSpace, v):
        self.space = space
        self.v = tuple(v)

    def __call__(self, x):
        return self.space.lattice.canonical(tuple(a + b for a, b in zip(x, self.v)))

    def __matmul__(self, other: "TorusTranslation") -> "TorusTranslation":
        return TorusTranslation(self.space, tuple(a + b for a, b in zip(self.v, other.v)))

    def form_defect(self) -> float:
        return 0.0


class ProductIsometry:
    def __init__(self, parts):
        self.parts = tuple(parts)

    def __call__(self, x):
        return tuple(I(xi) for I, xi in zip(self.parts, x))

    def __matmul__(self, other: "ProductIsometry") -> "ProductIsometry":
        return ProductIsometry(a @ b for a, b in zip(self.parts, other.parts))

    def form_defect(self) -> float:
        return max(I.form_defect() for I in self.parts)


def geodesic_involution(S, m):
    """The isometry fixing ``m`` and reversing every geodesic through it."""
    # the fixed point is renormalised so that M preserves the form to rounding
    if isinstance(S, (Sphere, ProjectiveSpace)):
        m = S.validate(m)
        m = m / np.linalg.norm(m)
        return LinearIsometry(S, 2.0 * np.outer(m, m) - np.eye(len(m)))
    if isinstance(S, Hyperbolic):
        m = S.validate(m)
        m = m * math.sqrt((1.0 / S.kappa) / _minkowski(m, m))
        Jm = m.copy()
        Jm[0] = -Jm[0]
        return LinearIsometry(S, 2.0 * S.kappa * np.outer(m, Jm) - np.eye(len(m)))
    if isinstance(S, Euclidean):
        m = S.validate(m)
        return RigidMotion(S, -np.eye(S.k), 2.0 * m)
    raise DomainError(f"no geodesic involution for {S!r}")


def _check_tangent(S, p, u):
    u = np.asarray(u, dtype=float)
    if isinstance(S, Hyperbolic):
        if abs(_minkowski(u, p)) > 1e-10 * max(1.0, abs(p[0])):
            raise DomainError("u is not tangent at p")
        nu = math.sqrt(max(_minkowski(u, u), 0.0))
    elif isinstance(S, Euclidean):
        nu = float(np.linalg.norm(u))
    else:
        if abs(float(u @ p)) > 1e-10:
            raise DomainError("u is not tangent at p")
        nu = float(np.linalg.norm(u))
    if abs(nu - 1.0) > 1e-10:
        raise DomainError("u is not a unit vector")
    return u


def exp_map(S, p, w):
    """Riemannian exponential (unit-radius spheres; any kappa < 0)."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if isinstance(S, Euclidean):
        return p + w
    if isinstance(S, Hyperbolic):
        R = S.R
        nw = math.sqrt(max(_minkowski(w, w), 0.0))
        if nw == 0:
            return p.copy()
        return math.cosh(nw / R) * p + R * math.sinh(nw / R) * (w / nw)
    if isinstance(S, (Sphere, ProjectiveSpace)):
        nw = float(np.linalg.norm(w))
        if nw == 0:
            return p.copy()
        y = math.cos(nw) * p + math.sin(nw) * (w / nw)
        return ProjectiveSpace.canonical(y) if isinstance(S, ProjectiveSpace) else y
    raise DomainError(f"no exponential map for {S!r}")


def transvection(S, p, u, T: float):
    """``s_p o s_q`` with ``q = exp_p(-(T/2) u)``; moves ``p`` to ``exp_p(T u)``."""
    p = S.validate(p)
    u = _check_tangent(S, p, u)
    q = exp_map(S if not isinstance(S, ProjectiveSpace) else Sphere(S.k), p, -(T / 2.0) * u)
    return geodesic_involution(S, p) @ geodesic_involution(S, q)


def rotation_transvection(S, p, u, T: float):
    """Closed form of the sphere transvection: rotation by ``T`` in span(p, u)."""
    p = S.validate(p)
    u = _check_tangent(S, p, u)
    M = (np.eye(len(p)) + math.sin(T) * (np.outer(u, p) - np.outer(p, u))
         + (math.cos(T) - 1.0) * (np.outer(p, p) + np.outer(u, u)))
    return LinearIsometry(S, M)


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(dim) via QR of a Gaussian matrix."""
    A = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def product_transvection(S: ProductSpace, p, u, speeds, T: float) -> ProductIsometry:
    """Factorwise transvections with steps ``c_i T``; ``sum c_i^2`` must be 1."""
    speeds = tuple(float(c) for c in speeds)
    if abs(sum(c * c for c in speeds) - 1.0) > 1e-12:
        raise DomainError("speeds must satisfy sum c_i^2 = 1")
    parts = []
    for f, pi, ui, c in zip(S.factors, p, u, speeds):
        parts.append(transvection(f, pi, ui, c * T))
    return ProductIsometry(parts)


# --- orbits ----------------------------------------------------------------------

def isometry_orbit(I, p, n: int) -> list:
    if n < 1:
        raise DomainError("n must be >= 1")
    out = [p]
    x = p
    for _ in range(n):
        x = I(x)
        out.append(x)
    return out


def _collapse(S, pts, tol):
    """Drop points within ``tol`` of an earlier orbit point."""
    D = S.pairwise(pts)
    keep = []
    for i in range(len(pts)):
        if all(D[i, j] > tol for j in keep):
            keep.append(i)
    return keep


def isometry_orbit_spectrum(S, I, p, n: int, policy: ClusterPolicy | None = None,
                            check_bound: bool = False, collapse_tol: float = 1e-9) -> NndSpectrum:
    """NND spectrum of ``{I^i(p) : i = 0..n}`` computed from all pairs.

    Exact tori are handled with rational arithmetic.  Floating orbits first
    drop points lying within ``collapse_tol`` of an earlier point.  With
    ``check_bound`` a nonnegatively curved space must satisfy
    ``|NND| <= 3^k + 1``.
    """
    pts = isometry_orbit(I, p, n)
    if isinstance(S, FlatTorusSpace) and S.lattice.exact:
        L = S.lattice
        zero = pts[0]
        D = [L.sqdist(x, zero) for x in pts[1:]]
        try:
            spec = orbit_spectrum(D, EXACT, squared=True)
        except DegenerateOrbitError:
            raise
    else:
        keep = _collapse(S, pts, collapse_tol)
        if len(keep) < 2:
            raise DegenerateOrbitError("orbit collapses to a single point")
        pts = [pts[i] for i in keep]
        D = S.pairwise(pts)
        np.fill_diagonal(D, np.inf)
        nb = np.argmin(D, axis=1)
        keys = D[np.arange(len(pts)), nb]
        spec = make_spectrum([float(v) for v in keys], [int(j) for j in nb],
                             policy or ClusterPolicy(), False)
    if check_bound and nonnegatively_curved(S):
        bound = orbit_nnd_ceiling(S)
        if spec.count > bound:
            raise BoundViolation(f"|NND| = {spec.count} > {bound}", {"n": n})
    return spec


# --- descriptors -----------------------------------------------------------------

def parse_space(desc: str):
    """Parse ``s2``, ``rp2``, ``e3``, ``h2:-1``, ``torus:3,5``, ``product:s2,s2``."""
    desc = desc.strip().lower()
    if desc.startswith("product:"):
        parts = desc[len("product:"):].split(",")
        return ProductSpace([parse_space(p) for p in parts])
    if desc.startswith("torus:"):
        from fractions import Fraction

        sides = [Fraction(s) for s in desc[len("torus:"):].split(",")]
        return FlatTorusSpace(TorusLattice(sides=sides))
    head, _, arg = desc.partition(":")
    for prefix, cls in (("rp", ProjectiveSpace), ("s", Sphere), ("e", Euclidean), ("h", Hyperbolic)):
        if head.startswith(prefix) and head[len(prefix):].isdigit():
            k = int(head[len(prefix):])
            if cls is Hyperbolic:
                return Hyperbolic(k, float(arg) if arg else -1.0)
            if arg:
                raise DomainError(f"unexpected parameter in {desc!r}")
            return cls(k)
    raise DomainError(f"unknown space {desc!r}")
