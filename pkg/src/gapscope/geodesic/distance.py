"""Intrinsic distance on an implicit surface by geodesic shooting.

The chordal distance ``|x - y|`` is a lower bound.  Refinement solves
``exp_x(w) = y`` for the tangent vector ``w`` by Gauss-Newton, using a
finite-difference Jacobian kept current by Broyden updates.  The start is the
tangential part of ``y - x`` (scaled to ``hint`` when given); the refined
value is ``|w|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, ShootingWarning
from . import _kernels as K
from .integrate import _project_py, _rk4_py, surface_code
from .surfaces import ImplicitSurface

H_MAX = 2e-3
MAX_ITER = 100

__all__ = ["IntrinsicDistance", "intrinsic_distance", "exp_surface"]


@dataclass(frozen=True)
class IntrinsicDistance:
    value: float
    method: str  # "refined" or "chordal"
    chordal: float
    iterations: int
    residual: float

    def __float__(self):
        return self.value


def exp_surface(S: ImplicitSurface, x, w, h_max: float = H_MAX) -> np.ndarray:
    """Endpoint of the geodesic from ``x`` with initial velocity ``w`` at time 1."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    L = float(np.linalg.norm(w))
    if L == 0:
        return x.copy()
    n = max(1, math.ceil(L / h_max))
    h = L / n
    s = np.concatenate([x, w / L])
    code = surface_code(S)
    if code is not None:
        return K.endpoint(code[0], code[1], s, h, n, 0.0)[:3]
    for _ in range(n):
        s = _project_py(S, _rk4_py(S, s, h, False))
    return s[:3]


def intrinsic_distance(S: ImplicitSurface, x, y, hint: float | None = None,
                       direction=None, tol: float = 1e-13, h_max: float = H_MAX,
                       max_iter: int = MAX_ITER, warn: bool = True) -> IntrinsicDistance:
    """Geodesic distance from ``x`` to ``y`` on ``S``.

    ``direction`` optionally fixes the initial guess direction at ``x``.
    Without convergence after ``max_iter`` iterations the chordal value is
    returned with ``method="chordal"`` and a :class:`ShootingWarning`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for p in (x, y):
        if abs(S.value(*p)) > 1e-8:
            raise DomainError("point is not on the surface")
    chord = float(np.linalg.norm(y - x))
    if chord == 0:
        return IntrinsicDistance(0.0, "refined", 0.0, 0, 0.0)
    e1, e2 = S.tangent_basis(x)
    E = np.column_stack([e1, e2])
    d = np.asarray(direction, dtype=float) if direction is not None else (y - x)
    c = E.T @ d
    nc = np.linalg.norm(c)
    if nc == 0:
        c = np.array([1.0, 0.0])
        nc = 1.0
    c = c / nc * (hint if hint else chord)
    scale = max(chord, 1e-3)
    res = math.inf
    J = None
    end = exp_surface(S, x, E @ c, h_max)
    r = y - end
    for it in range(1, max_iter + 1):
        res = float(np.linalg.norm(r))
        if res <= tol * max(1.0, scale) or res < 1e-15:
            return IntrinsicDistance(float(np.linalg.norm(c)), "refined", chord, it, res)
        if J is None or it % 8 == 0:
            eps = 1e-7 * max(1.0, float(np.linalg.norm(c)))
            J = np.empty((3, 2))
            for k in range(2):
                cp = c.copy()
                cp[k] += eps
                J[:, k] = (exp_surface(S, x, E @ cp, h_max) - end) / eps
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        # damp steps that would move far relative to the current length
        lim = 0.5 * max(float(np.linalg.norm(c)), chord)
        ns = float(np.linalg.norm(step))
        if ns > lim:
            step *= lim / ns
        c = c + step
        new_end = exp_surface(S, x, E @ c, h_max)
        # Broyden update of the Jacobian between full finite-difference rebuilds
        dy = new_end - end
        J = J + np.outer(dy - J @ step, step) / (step @ step)
        end = new_end
        r = y - end
    if warn:
        warnings.warn(f"shooting did not converge (residual {res:.3g}); using chordal distance",
                      ShootingWarning, stacklevel=2)
    return IntrinsicDistance(chord, "chordal", chord, max_iter, res)
