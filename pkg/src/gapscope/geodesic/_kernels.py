"""Compiled RK4 kernels for geodesics on the builtin implicit surfaces.

Surfaces are passed as ``(kind, params)``: kind 0 is the ellipsoid with axes
``params[:3]``, kind 1 the torus of revolution with ``params = (R, r)``,
kind 2 the plane ``z = 0``.
"""

import math

import numpy as np
from numba import njit

ELLIPSOID, TORUS, PLANE = 0, 1, 2

OK, BLOWUP, SINGULAR = 0, 1, 2


@njit(cache=True)
def value(kind, p, x, y, z):
    if kind == ELLIPSOID:
        return x * x / (p[0] * p[0]) + y * y / (p[1] * p[1]) + z * z / (p[2] * p[2]) - 1.0
    if kind == TORUS:
        rho = math.sqrt(x * x + y * y)
        return (rho - p[0]) ** 2 + z * z - p[1] * p[1]
    return z


@njit(cache=True)
def grad(kind, p, x, y, z):
    if kind == ELLIPSOID:
        return 2 * x / (p[0] * p[0]), 2 * y / (p[1] * p[1]), 2 * z / (p[2] * p[2])
    if kind == TORUS:
        rho = math.sqrt(x * x + y * y)
        q = 1.0 - p[0] / rho
        return 2 * x * q, 2 * y * q, 2 * z
    return 0.0, 0.0, 1.0


@njit(cache=True)
def hess_quad(kind, p, x, y, z, vx, vy, vz):
    if kind == ELLIPSOID:
        return 2 * (vx * vx / (p[0] * p[0]) + vy * vy / (p[1] * p[1]) + vz * vz / (p[2] * p[2]))
    if kind == TORUS:
        rho2 = x * x + y * y
        q = 1.0 - p[0] / math.sqrt(rho2)
        radial = (x * vx + y * vy) ** 2 / rho2
        swirl = (y * vx - x * vy) ** 2 / rho2
        return 2.0 * (radial + q * swirl + vz * vz)
    return 0.0


@njit(cache=True)
def gauss(kind, p, x, y, z):
    if kind == ELLIPSOID:
        a2, b2, c2 = p[0] * p[0], p[1] * p[1], p[2] * p[2]
        s = x * x / (a2 * a2) + y * y / (b2 * b2) + z * z / (c2 * c2)
        return 1.0 / (a2 * b2 * c2 * s * s)
    if kind == TORUS:
        rho = math.sqrt(x * x + y * y)
        return (rho - p[0]) / (p[1] * p[1] * rho)
    return 0.0


@njit(cache=True)
def accel(kind, p, x, y, z, vx, vy, vz):
    gx, gy, gz = grad(kind, p, x, y, z)
    g2 = gx * gx + gy * gy + gz * gz
    c = -hess_quad(kind, p, x, y, z, vx, vy, vz) / g2
    return c * gx, c * gy, c * gz, g2


@njit(cache=True)
def rk4_stage(kind, p, s, h, jac):
    """One RK4 step of the state ``(x, v[, j, j'])``; returns the new state."""
    n = s.shape[0]
    k = np.empty((4, n))
    tmp = s.copy()
    g2min = 1e300
    for st in range(4):
        if st == 0:
            for i in range(n):
                tmp[i] = s[i]
        else:
            fac = 0.5 * h if st < 3 else h
            for i in range(n):
                tmp[i] = s[i] + fac * k[st - 1, i]
        ax, ay, az, g2 = accel(kind, p, tmp[0], tmp[1], tmp[2], tmp[3], tmp[4], tmp[5])
        if g2 < g2min:
            g2min = g2
        k[st, 0] = tmp[3]
        k[st, 1] = tmp[4]
        k[st, 2] = tmp[5]
        k[st, 3] = ax
        k[st, 4] = ay
        k[st, 5] = az
        if jac:
            K = gauss(kind, p, tmp[0], tmp[1], tmp[2])
            k[st, 6] = tmp[7]
            k[st, 7] = -K * tmp[6]
    out = np.empty(n)
    for i in range(n):
        out[i] = s[i] + h / 6.0 * (k[0, i] + 2 * k[1, i] + 2 * k[2, i] + k[3, i])
    return out, g2min


@njit(cache=True)
def project(kind, p, s):
    """Newton steps of the position onto ``F = 0``; unit tangent velocity."""
    x, y, z = s[0], s[1], s[2]
    for _ in range(4):
        f = value(kind, p, x, y, z)
        gx, gy, gz = grad(kind, p, x, y, z)
        g2 = gx * gx + gy * gy + gz * gz
        t = f / g2
        x -= t * gx
        y -= t * gy
        z -= t * gz
        if abs(f) < 1e-17:
            break
    gx, gy, gz = grad(kind, p, x, y, z)
    g2 = gx * gx + gy * gy + gz * gz
    vx, vy, vz = s[3], s[4], s[5]
    dot = (vx * gx + vy * gy + vz * gz) / g2
    vx -= dot * gx
    vy -= dot * gy
    vz -= dot * gz
    nv = math.sqrt(vx * vx + vy * vy + vz * vz)
    s[0], s[1], s[2] = x, y, z
    s[3], s[4], s[5] = vx / nv, vy / nv, vz / nv


@njit(cache=True)
def integrate(kind, p, s0, h, nsteps, pos, vel, resF, resV, jac, jout, tol):
    """Fixed-step RK4 with projection; fills the output arrays.

    Returns ``(status, step)``; status is OK, BLOWUP (pre-projection
    constraint residual above ``tol``) or SINGULAR (vanishing gradient).
    """
    s = s0.copy()
    project(kind, p, s)
    for i in range(nsteps + 1):
        if i > 0:
            s, g2 = rk4_stage(kind, p, s, h, jac)
            if g2 < 1e-24:
                return SINGULAR, i
            pre = abs(value(kind, p, s[0], s[1], s[2]))
            if not pre <= tol:
                return BLOWUP, i
            project(kind, p, s)
        pos[i, 0], pos[i, 1], pos[i, 2] = s[0], s[1], s[2]
        vel[i, 0], vel[i, 1], vel[i, 2] = s[3], s[4], s[5]
        resF[i] = abs(value(kind, p, s[0], s[1], s[2]))
        resV[i] = abs(math.sqrt(s[3] * s[3] + s[4] * s[4] + s[5] * s[5]) - 1.0)
        if jac:
            jout[i, 0] = s[6]
            jout[i, 1] = s[7]
    return OK, nsteps


@njit(cache=True)
def endpoint(kind, p, s0, h, nsteps, last):
    """State after ``nsteps`` steps of size ``h`` and one final step ``last``."""
    s = s0.copy()
    for i in range(nsteps):
        s, g2 = rk4_stage(kind, p, s, h, False)
        project(kind, p, s)
    if last != 0.0:
        s, g2 = rk4_stage(kind, p, s, last, False)
        project(kind, p, s)
    return s


@njit(cache=True)
def step(kind, p, s, dt, jac):
    """One projected RK4 step of size ``dt`` (Jacobi pair carried when ``jac``)."""
    out, g2 = rk4_stage(kind, p, s, dt, jac)
    project(kind, p, out)
    return out
