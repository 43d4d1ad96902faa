"""Implicit surfaces ``F(x) = 0`` in R^3 with analytic derivatives.

Each surface provides ``value``, ``grad``, ``hess_quad`` (the quadratic form
``v^T H v``), ``hessian`` and ``gauss_curvature``.  The scalar methods work on
plain floats so the integrator can avoid numpy overhead on tiny vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


class ImplicitSurface:
    name = "surface"

    def value(self, x, y, z) -> float:
        raise NotImplementedError

    def grad(self, x, y, z):
        raise NotImplementedError

    def hess_quad(self, x, y, z, vx, vy, vz) -> float:
        H = self.hessian(x, y, z)
        v = np.array([vx, vy, vz])
        return float(v @ H @ v)

    def hessian(self, x, y, z) -> np.ndarray:
        raise NotImplementedError

    def gauss_curvature(self, x, y, z) -> float:
        return generic_gauss_curvature(self, x, y, z)

    def injectivity_bound(self) -> float:
        """A lower bound for the injectivity radius (0 when unknown)."""
        return 0.0

    def project(self, x, y, z, iters: int = 3):
        """Newton steps along the gradient onto ``F = 0``."""
        for _ in range(iters):
            f = self.value(x, y, z)
            gx, gy, gz = self.grad(x, y, z)
            g2 = gx * gx + gy * gy + gz * gz
            t = f / g2
            x, y, z = x - t * gx, y - t * gy, z - t * gz
            if abs(f) < 1e-16:
                break
        return x, y, z

    def tangent_basis(self, p):
        """Orthonormal ``(e1, e2)`` spanning the tangent plane at ``p``."""
        n = np.array(self.grad(*p), dtype=float)
        n /= np.linalg.norm(n)
        a = np.eye(3)[int(np.argmin(np.abs(n)))]
        e1 = a - (a @ n) * n
        e1 /= np.linalg.norm(e1)
        return e1, np.cross(n, e1)


def generic_gauss_curvature(S, x, y, z) -> float:
    """``K = grad F adj(H) grad F^T / |grad F|^4`` for an implicit surface."""
    g = np.array(S.grad(x, y, z), dtype=float)
    H = S.hessian(x, y, z)
    adj = np.array([
        [H[1, 1] * H[2, 2] - H[1, 2] * H[2, 1], H[0, 2] * H[2, 1] - H[0, 1] * H[2, 2], H[0, 1] * H[1, 2] - H[0, 2] * H[1, 1]],
        [H[1, 2] * H[2, 0] - H[1, 0] * H[2, 2], H[0, 0] * H[2, 2] - H[0, 2] * H[2, 0], H[0, 2] * H[1, 0] - H[0, 0] * H[1, 2]],
        [H[1, 0] * H[2, 1] - H[1, 1] * H[2, 0], H[0, 1] * H[2, 0] - H[0, 0] * H[2, 1], H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]],
    ])
    return float(g @ adj @ g / (g @ g) ** 2)


@dataclass(frozen=True)
class Ellipsoid(ImplicitSurface):
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    name = "ellipsoid"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise DomainError("ellipsoid axes must be positive")

    def value(self, x, y, z):
        return x * x / self.a ** 2 + y * y / self.b ** 2 + z * z / self.c ** 2 - 1.0

    def grad(self, x, y, z):
        return 2 * x / self.a ** 2, 2 * y / self.b ** 2, 2 * z / self.c ** 2

    def hess_quad(self, x, y, z, vx, vy, vz):
        return 2 * (vx * vx / self.a ** 2 + vy * vy / self.b ** 2 + vz * vz / self.c ** 2)

    def hessian(self, x, y, z):
        return np.diag([2 / self.a ** 2, 2 / self.b ** 2, 2 / self.c ** 2])

    def gauss_curvature(self, x, y, z):
        a2, b2, c2 = self.a ** 2, self.b ** 2, self.c ** 2
        s = x * x / a2 ** 2 + y * y / b2 ** 2 + z * z / c2 ** 2
        return 1.0 / (a2 * b2 * c2 * s * s)

    def max_curvature(self) -> float:
        a, b, c = sorted((self.a, self.b, self.c))
        # attained at the ends of the longest axis
        return c * c / (a * a * b * b)

    def injectivity_bound(self) -> float:
        """``pi / sqrt(K_max)``, valid for a convex surface (Klingenberg)."""
        return math.pi / math.sqrt(self.max_curvature())


@dataclass(frozen=True)
class SphereSurface(Ellipsoid):
    """Unit-radius default; ``radius`` rescales all three axes."""

    radius: float = 1.0
    name = "sphere"

    def __init__(self, radius: float = 1.0):
        object.__setattr__(self, "radius", float(radius))
        object.__setattr__(self, "a", float(radius))
        object.__setattr__(self, "b", float(radius))
        object.__setattr__(self, "c", float(radius))

    def injectivity_bound(self) -> float:
        return math.pi * self.radius


@dataclass(frozen=True)
class TorusSurface(ImplicitSurface):
    """Torus of revolution ``(sqrt(x^2 + y^2) - R)^2 + z^2 = r^2`` about the z axis."""

    R: float = 2.0
    r: float = 1.0
    name = "torus"

    def __post_init__(self):
        if not self.R > self.r > 0:
            raise DomainError("torus needs R > r > 0")

    def value(self, x, y, z):
        rho = math.hypot(x, y)
        return (rho - self.R) ** 2 + z * z - self.r ** 2

    def grad(self, x, y, z):
        rho = math.hypot(x, y)
        q = 1.0 - self.R / rho
        return 2 * x * q, 2 * y * q, 2 * z

    def hess_quad(self, x, y, z, vx, vy, vz):
        rho2 = x * x + y * y
        rho = math.sqrt(rho2)
        q = 1.0 - self.R / rho
        radial = (x * vx + y * vy) ** 2 / rho2
        swirl = (y * vx - x * vy) ** 2 / rho2
        return 2.0 * (radial + q * swirl + vz * vz)

    def hessian(self, x, y, z):
        rho = math.hypot(x, y)
        q = 1.0 - self.R / rho
        t = self.R / rho ** 3
        H = np.zeros((3, 3))
        H[0, 0] = 2 * (q + t * x * x)
        H[1, 1] = 2 * (q + t * y * y)
        H[0, 1] = H[1, 0] = 2 * t * x * y
        H[2, 2] = 2.0
        return H

    def gauss_curvature(self, x, y, z):
        rho = math.hypot(x, y)
        return (rho - self.R) / (self.r * self.r * rho)


@dataclass(frozen=True)
class PlaneSurface(ImplicitSurface):
    """The plane ``z = 0``: a flat chart for flat-torus comparisons."""

    name = "plane"

    def value(self, x, y, z):
        return z

    def grad(self, x, y, z):
        return 0.0, 0.0, 1.0

    def hess_quad(self, x, y, z, vx, vy, vz):
        return 0.0

    def hessian(self, x, y, z):
        return np.zeros((3, 3))

    def gauss_curvature(self, x, y, z):
        return 0.0

    def injectivity_bound(self) -> float:
        return math.inf


def parse_surface(desc: str) -> ImplicitSurface:
    """``sphere``, ``sphere:R``, ``ellipsoid:a,b,c``, ``torus:R,r`` or ``plane``."""
    head, _, arg = desc.strip().lower().partition(":")
    vals = [float(v) for v in arg.split(",")] if arg else []
    if head == "sphere":
        return SphereSurface(*vals)
    if head == "ellipsoid":
        if len(vals) != 3:
            raise DomainError("ellipsoid needs a,b,c")
        return Ellipsoid(*vals)
    if head == "torus":
        return TorusSurface(*vals)
    if head == "plane":
        return PlaneSurface()
    raise DomainError(f"unknown surface {desc!r}")
