"""Unit-speed geodesics on implicit surfaces.

The geodesic equation for ``F(x) = 0`` is
``x'' = -(x'^T H x' / |grad F|^2) grad F``.  It is integrated with classical
RK4; after each step the position is pulled back to the surface by Newton
iterations along ``grad F`` and the velocity is made tangent and unit.
Builtin surfaces run through compiled kernels; other surfaces use the
reference Python loop.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, SingularSurfaceError, StepSizeError
from . import _kernels as K
from .surfaces import Ellipsoid, ImplicitSurface, PlaneSurface, TorusSurface

BLOWUP_TOL = 1e-6

__all__ = [
    "GeodesicTrajectory",
    "integrate_geodesic",
    "integrate_reference",
    "sample_geodesic",
    "reversal_error",
    "surface_code",
    "advance",
]


def surface_code(S: ImplicitSurface):
    """``(kind, params)`` for the compiled kernels, or ``None``."""
    if isinstance(S, Ellipsoid):
        return K.ELLIPSOID, np.array([S.a, S.b, S.c], dtype=float)
    if isinstance(S, TorusSurface):
        return K.TORUS, np.array([S.R, S.r], dtype=float)
    if isinstance(S, PlaneSurface):
        return K.PLANE, np.zeros(1)
    return None


@dataclass
class GeodesicTrajectory:
    surface: ImplicitSurface
    x0: np.ndarray
    v0: np.ndarray
    h: float
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    res_F: np.ndarray
    res_V: np.ndarray
    jacobi: np.ndarray | None = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return float(self.times[-1])

    def max_residuals(self):
        return float(self.res_F.max()), float(self.res_V.max())

    def point_at(self, t: float) -> np.ndarray:
        """Position at arc length ``t`` by one RK4 step from the nearest node."""
        return self.state_at(t)[:3]

    def state_at(self, t: float) -> np.ndarray:
        if not -1e-12 <= t <= self.length + 1e-12:
            raise DomainError(f"t = {t} outside [0, {self.length}]")
        i = int(round(t / self.h))
        i = min(max(i, 0), len(self.times) - 1)
        s = np.concatenate([self.positions[i], self.velocities[i]])
        return advance(self.surface, s, t - self.times[i], self.h)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x,y,z,vx,vy,vz,resF,resV\n")
        data = np.column_stack([self.times, self.positions, self.velocities, self.res_F, self.res_V])
        np.savetxt(buf, data, delimiter=",", fmt="%.17g")
        return buf.getvalue()


def _check_start(S, x0, v0):
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if abs(S.value(*x0)) > 1e-8:
        raise DomainError("x0 is not on the surface")
    g = np.asarray(S.grad(*x0), dtype=float)
    if np.linalg.norm(g) < 1e-12:
        raise SingularSurfaceError("gradient vanishes at x0")
    if abs(v0 @ g) / np.linalg.norm(g) > 1e-8 or abs(np.linalg.norm(v0) - 1) > 1e-8:
        raise DomainError("v0 must be a unit tangent vector")
    return x0, v0


def integrate_geodesic(S: ImplicitSurface, x0, v0, length: float, h: float = 1e-3,
                       jacobi: bool = False) -> GeodesicTrajectory:
    """Integrate the unit-speed geodesic from ``(x0, v0)`` over ``[0, length]``.

    The step is shrunk to ``length / ceil(length / h)`` so the last node is at
    ``length``.  With ``jacobi`` the scalar Jacobi equation ``j'' + K j = 0``
    with ``j(0) = 0, j'(0) = 1`` is carried along.
    """
    if not length > 0 or not h > 0:
        raise DomainError("length and h must be positive")
    x0, v0 = _check_start(S, x0, v0)
    nsteps = max(1, math.ceil(length / h - 1e-9))
    h = length / nsteps
    code = surface_code(S)
    if code is None:
        return integrate_reference(S, x0, v0, length, h, jacobi)
    kind, p = code
    pos = np.empty((nsteps + 1, 3))
    vel = np.empty((nsteps + 1, 3))
    rF = np.empty(nsteps + 1)
    rV = np.empty(nsteps + 1)
    jo = np.empty((nsteps + 1, 2))
    s0 = np.concatenate([x0, v0, [0.0, 1.0]]) if jacobi else np.concatenate([x0, v0])
    status, step = K.integrate(kind, p, s0, h, nsteps, pos, vel, rF, rV, jacobi, jo, BLOWUP_TOL)
    _raise_status(status, step, h)
    times = np.arange(nsteps + 1) * h
    times[-1] = length
    return GeodesicTrajectory(S, x0, v0, h, times, pos, vel, rF, rV, jo if jacobi else None)


def _raise_status(status, step, h):
    if status == K.BLOWUP:
        raise StepSizeError(f"constraint residual above {BLOWUP_TOL} at step {step}; try h < {h}")
    if status == K.SINGULAR:
        raise SingularSurfaceError(f"gradient vanished near step {step}")


def _accel_py(S, x, v):
    g = np.asarray(S.grad(*x), dtype=float)
    g2 = g @ g
    if g2 < 1e-24:
        raise SingularSurfaceError("gradient vanished")
    return -(S.hess_quad(*x, *v) / g2) * g


def _project_py(S, s):
    x, y, z = S.project(*s[:3], iters=4)
    g = np.asarray(S.grad(x, y, z), dtype=float)
    v = s[3:6] - (s[3:6] @ g) / (g @ g) * g
    v = v / np.linalg.norm(v)
    out = s.copy()
    out[:3] = (x, y, z)
    out[3:6] = v
    return out


def _rhs_py(S, s, jac):
    d = np.empty_like(s)
    d[:3] = s[3:6]
    d[3:6] = _accel_py(S, s[:3], s[3:6])
    if jac:
        d[6] = s[7]
        d[7] = -S.gauss_curvature(*s[:3]) * s[6]
    return d


def _rk4_py(S, s, h, jac):
    k1 = _rhs_py(S, s, jac)
    k2 = _rhs_py(S, s + 0.5 * h * k1, jac)
    k3 = _rhs_py(S, s + 0.5 * h * k2, jac)
    k4 = _rhs_py(S, s + h * k3, jac)
    return s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_reference(S, x0, v0, length, h, jacobi=False) -> GeodesicTrajectory:
    """Plain-Python version of :func:`integrate_geodesic` (any surface)."""
    nsteps = max(1, math.ceil(length / h - 1e-9))
    h = length / nsteps
    s = np.concatenate([x0, v0, [0.0, 1.0]]) if jacobi else np.concatenate([x0, v0])
    s = _project_py(S, s)
    pos, vel, rF, rV, jo = [], [], [], [], []
    for i in range(nsteps + 1):
        if i > 0:
            s = _rk4_py(S, s, h, jacobi)
            if not abs(S.value(*s[:3])) <= BLOWUP_TOL:
                _raise_status(K.BLOWUP, i, h)
            s = _project_py(S, s)
        pos.append(s[:3].copy())
        vel.append(s[3:6].copy())
        rF.append(abs(S.value(*s[:3])))
        rV.append(abs(np.linalg.norm(s[3:6]) - 1.0))
        if jacobi:
            jo.append(s[6:8].copy())
    times = np.arange(nsteps + 1) * h
    times[-1] = length
    return GeodesicTrajectory(S, np.asarray(x0), np.asarray(v0), h, times, np.array(pos),
                              np.array(vel), np.array(rF), np.array(rV),
                              np.array(jo) if jacobi else None)


def advance(S, s, t: float, h: float) -> np.ndarray:
    """Flow the state ``s = (x, v)`` (unit ``v``) for arc length ``t`` (may be negative)."""
    s = np.asarray(s, dtype=float)
    if t == 0:
        return s.copy()
    sign = 1.0 if t > 0 else -1.0
    n = int(abs(t) // h)
    last = abs(t) - n * h
    st = s.copy()
    st[3:6] *= sign
    code = surface_code(S)
    if code is not None:
        out = K.endpoint(code[0], code[1], st, h, n, last)
    else:
        out = st
        for _ in range(n):
            out = _project_py(S, _rk4_py(S, out, h, False))
        if last:
            out = _project_py(S, _rk4_py(S, out, last, False))
    out[3:6] *= sign
    return out


def reversal_error(traj: GeodesicTrajectory) -> float:
    """Distance from ``x0`` after integrating back from the endpoint."""
    s = np.concatenate([traj.positions[-1], -traj.velocities[-1]])
    back = integrate_geodesic(traj.surface, s[:3], s[3:], traj.length, traj.h)
    return float(np.linalg.norm(back.positions[-1] - traj.x0))


def sample_geodesic(traj: GeodesicTrajectory, T: float, n: int) -> np.ndarray:
    """Points ``gamma(i T)`` for ``i = 0..n`` by cubic Hermite interpolation."""
    if not T > 0:
        raise DomainError("T must be positive")
    if n * T > traj.length * (1 + 1e-12):
        raise DomainError(f"trajectory of length {traj.length} is shorter than n T = {n * T}")
    t = np.minimum(np.arange(n + 1) * T, traj.length)
    return hermite(traj, t)


def hermite(traj: GeodesicTrajectory, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = traj.h
    i = np.minimum((t / h).astype(np.int64), len(traj.times) - 2)
    i = np.maximum(i, 0)
    t0 = traj.times[i]
    dt = traj.times[i + 1] - t0
    u = ((t - t0) / dt)[:, None]
    p0, p1 = traj.positions[i], traj.positions[i + 1]
    m0, m1 = traj.velocities[i] * dt[:, None], traj.velocities[i + 1] * dt[:, None]
    u2, u3 = u * u, u * u * u
    return ((2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0
            + (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m1)
