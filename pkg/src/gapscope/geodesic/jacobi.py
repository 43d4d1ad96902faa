"""Conjugate points along geodesics from the scalar Jacobi equation.

Along a unit-speed geodesic on a surface, normal Jacobi fields ``j N``
satisfy ``j'' + K(gamma(t)) j = 0``.  Starting from ``j(0) = 0, j'(0) = 1``,
the zeros of ``j`` at positive times are the conjugate points of
``gamma(0)``.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .integrate import GeodesicTrajectory, _project_py, _rk4_py, integrate_geodesic, surface_code

__all__ = ["conjugate_points"]


def _partial(S, state, dt):
    code = surface_code(S)
    if code is not None:
        return K.step(code[0], code[1], state, dt, True)
    out = _rk4_py(S, state, dt, True)
    out[:6] = _project_py(S, out[:6])
    return out


def conjugate_points(S, traj: GeodesicTrajectory, max_length: float | None = None,
                     tol: float = 1e-8, h: float | None = None) -> list[float]:
    """Times in ``(0, max_length]`` where ``j`` changes sign, bisected to ``tol``.

    The geodesic and ``(j, j')`` are integrated jointly with the step of
    ``traj`` (or ``h``); the curvature enters at every RK4 stage.
    """
    L = traj.length if max_length is None else float(max_length)
    h = traj.h if h is None else float(h)
    joint = integrate_geodesic(S, traj.x0, traj.v0, L, h, jacobi=True)
    j = joint.jacobi[:, 0]
    out = []
    for i in range(1, len(j) - 1):
        a, b = j[i], j[i + 1]
        if a == 0.0:
            out.append(float(joint.times[i]))
            continue
        if a * b < 0:
            state = np.concatenate([joint.positions[i], joint.velocities[i], joint.jacobi[i]])
            lo, hi = 0.0, float(joint.times[i + 1] - joint.times[i])
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if _partial(S, state, mid)[6] * a > 0:
                    lo = mid
                else:
                    hi = mid
            out.append(float(joint.times[i] + 0.5 * (lo + hi)))
    return out
