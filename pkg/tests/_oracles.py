"""Independent reference computations shared by the test modules."""

import math

import numpy as np


def random_sphere_config(rng, k=2):
    """A random point p on S^k and a random unit tangent u at p."""
    p = rng.standard_normal(k + 1)
    p /= np.linalg.norm(p)
    u = rng.standard_normal(k + 1)
    u -= (u @ p) * p
    return p, u / np.linalg.norm(u)


def great_circle(p, u, t):
    """Closed-form unit-speed great circle through p with velocity u."""
    return math.cos(t) * p + math.sin(t) * u


def circle_orbit_nnd_count(T, n, tol=1e-9):
    """|NND| of {i T mod 2 pi} on a circle of length 2 pi by sorted gaps."""
    ang = np.sort(np.mod(np.arange(n + 1) * T, 2 * math.pi))
    keep = [ang[0]]
    for a in ang[1:]:
        if a - keep[-1] > tol:
            keep.append(a)
    ang = np.array(keep)
    if len(ang) > 1 and 2 * math.pi - ang[-1] + ang[0] <= tol:
        ang = ang[:-1]
    g = np.diff(np.append(ang, ang[0] + 2 * math.pi))
    nnd = np.minimum(g, np.roll(g, 1))
    vals = np.sort(nnd)
    count = 1
    for a, b in zip(vals, vals[1:]):
        if b - a > tol * max(1.0, a):
            count += 1
    return count


def nnd_values(D):
    """Per-point nearest-neighbour values from a distance matrix."""
    D = np.array(D, dtype=float)
    np.fill_diagonal(D, np.inf)
    return D.min(axis=1)
