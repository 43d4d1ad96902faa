import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapscope.errors import DomainError
from gapscope.flat import KleinQuotient, klein_geodesic_intersections
from gapscope.geodesic.distance import intrinsic_distance
from gapscope.geodesic.integrate import integrate_geodesic
from gapscope.geodesic.intersections import (
    Curve,
    count_self_intersections,
    derivative_triple_analytic,
    derivative_triple_fd,
    second_differences,
)
from gapscope.geodesic.surfaces import Ellipsoid, SphereSurface

F = Fraction
ELL = Ellipsoid(1, 1.2, 1.5)


def ellipsoid_trajectory(length):
    v = np.array([0.0, 1 / 1.2, 1 / 1.5])
    return integrate_geodesic(ELL, [1, 0, 0], v / np.linalg.norm(v), length, 1e-3)


def test_great_circle_has_no_transverse_crossings():
    S = SphereSurface()
    tr = integrate_geodesic(S, [1, 0, 0], [0, 0.6, 0.8], 2 * math.pi, 1e-3)
    rep = count_self_intersections(tr)
    assert rep.records == [] and rep.total == 0
    # closing up tangentially is reported as ambiguous, not counted
    assert len(rep.ambiguous) == 1


def sampled(fun, dfun, t):
    return Curve(t, np.array([fun(x) for x in t]), np.array([dfun(x) for x in t]), t[1] - t[0])


def test_planar_figure_eight():
    # (sin t, sin t cos t) passes the origin at t = 0 and t = pi with velocities (1, 1), (-1, 1)
    c = sampled(lambda x: np.array([math.sin(x), math.sin(x) * math.cos(x), 0.0]),
                lambda x: np.array([math.cos(x), math.cos(2 * x), 0.0]),
                np.linspace(-1.0, 4.0, 5001))
    rep = count_self_intersections(c)
    assert len(rep.records) == 1
    r = rep.records[0]
    assert r.s == pytest.approx(0.0, abs=1e-9) and r.t == pytest.approx(math.pi, abs=1e-9)
    assert np.allclose(r.location, 0, atol=1e-9)
    assert r.angle == pytest.approx(math.pi / 2, abs=1e-9)


def test_triple_point_has_multiplicity_three():
    # three-petal rose r = cos(3 theta) runs through the origin three times
    def f(x):
        return np.array([math.cos(3 * x) * math.cos(x), math.cos(3 * x) * math.sin(x), 0.0])

    def df(x):
        return np.array([-3 * math.sin(3 * x) * math.cos(x) - math.cos(3 * x) * math.sin(x),
                         -3 * math.sin(3 * x) * math.sin(x) + math.cos(3 * x) * math.cos(x), 0.0])

    rep = count_self_intersections(sampled(f, df, np.linspace(0.05, math.pi - 0.05, 3001)))
    at_origin = [p for p in rep.points if np.linalg.norm(p.location) < 1e-8]
    assert len(at_origin) == 1 and at_origin[0].multiplicity == 3
    assert rep.total == 3
    for r in at_origin[0].records:
        assert r.angle == pytest.approx(math.pi / 3, abs=1e-8) or r.angle == pytest.approx(2 * math.pi / 3, abs=1e-8)


def test_ellipsoid_crossing_count_regression():
    rep = count_self_intersections(ellipsoid_trajectory(30.0))
    assert len(rep.records) == 11


def test_counts_grow_with_length():
    counts = [len(count_self_intersections(ellipsoid_trajectory(L)).records) for L in (10, 20, 30, 40)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_crossings_lie_on_both_branches():
    tr = ellipsoid_trajectory(30.0)
    for r in count_self_intersections(tr).records:
        assert np.linalg.norm(tr.point_at(r.s) - tr.point_at(r.t)) < 1e-8
        assert r.s < r.t


def test_analytic_triple_examples():
    assert derivative_triple_analytic(1, 2, math.pi / 2) == pytest.approx((4, 10, 26))
    assert derivative_triple_analytic(1, 1, math.pi) == pytest.approx((8, 8, 32))
    D = derivative_triple_analytic(1.5, 0.5, 1e-9)
    assert D == pytest.approx((0, 2 * (1.5 - 0.5) ** 2, 2 * (1.5 - 0.5) ** 2), abs=1e-12)
    with pytest.raises(DomainError):
        derivative_triple_analytic(0, 1, 1.0)


@settings(max_examples=100)
@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0, math.pi))
def test_analytic_triple_identities(s, t, a):
    D1, D2, D3 = derivative_triple_analytic(s, t, a)
    E1, E2, E3 = derivative_triple_analytic(t, s, a)
    assert (D1, D3) == pytest.approx((E1, E3)) and D2 == pytest.approx(E2)
    # D3 is twice the squared distance between the points at parameters 1 + s and 1 + t
    ref = 2 * ((1 + s) ** 2 + (1 + t) ** 2 - 2 * (1 + s) * (1 + t) * math.cos(a))
    assert D3 == pytest.approx(ref, rel=1e-12, abs=1e-12)


def planar_branches(s, t, alpha):
    """A curve crossing itself at the origin at parameters s < t with angle alpha."""
    a = np.array([1.0, 0.0])
    b = np.array([math.cos(alpha), math.sin(alpha)])

    def gamma(x):
        return (x - s) * a if abs(x - s) < abs(x - t) else (x - t) * b

    return gamma


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 3), st.floats(0.2, 2.5), st.floats(0.3, math.pi - 0.3))
def test_fd_triple_recovers_straight_crossings(s, gap, alpha):
    t = s + 4 + gap
    gamma = planar_branches(s, t, alpha)
    fd = derivative_triple_fd(gamma, s, t, dist=lambda p, q: float(np.linalg.norm(p - q)))
    assert fd == pytest.approx(derivative_triple_analytic(s, t, alpha), rel=1e-8)


def test_fd_requires_a_crossing():
    gamma = planar_branches(1.0, 6.0, 1.0)
    with pytest.raises(DomainError):
        derivative_triple_fd(lambda x: gamma(x) + (x > 3) * np.array([0, 1e-3]), 1.0, 6.0,
                             dist=lambda p, q: float(np.linalg.norm(p - q)), crossing_tol=1e-6)
    with pytest.raises(DomainError):
        derivative_triple_fd(gamma, 6.0, 1.0, dist=lambda p, q: float(np.linalg.norm(p - q)))


def test_klein_fd_is_exact():
    K = KleinQuotient(1, 1)
    start = (F(1, 7), F(1, 3))
    u = (F(4, 5), F(3, 5))
    crossings, _, _ = klein_geodesic_intersections(K, "3/4", 5, start)

    def gamma(x):
        return (start[0] + x * u[0], start[1] + x * u[1])

    for c in crossings:
        s, t = 5 * c.s, 5 * c.t
        fd = derivative_triple_fd(gamma, s, t, (F(1, 100),), sqdist=K.sqdist, crossing_tol=0)
        c_ = c.cos_angle
        exact = (4 - 4 * c_, 2 * s * s + 2 * t * t - 4 * s * t * c_)
        assert fd[0] == exact[0] and fd[1] == exact[1]
        assert fd[2] == exact[1] + exact[0] * (1 + s + t)


def test_ellipsoid_fd_triple_matches():
    tr = ellipsoid_trajectory(30.0)
    recs = count_self_intersections(tr).records[:4]

    def dist(p, q):
        return intrinsic_distance(ELL, p, q).value

    for r in recs:
        fd = derivative_triple_fd(tr.point_at, r.s, r.t, dist=dist, crossing_tol=1e-8)
        an = derivative_triple_analytic(r.s, r.t, r.angle)
        assert max(abs(a - b) / abs(a) for a, b in zip(an, fd)) < 1e-3


def test_second_differences_of_quadratic():
    f2 = lambda x, y: 3 * x * x + 2 * x * y + 5 * y * y  # noqa: E731
    assert second_differences(f2, F(1, 10)) == (6, 10, 20)


def test_uneven_sampling_rejected():
    t = np.linspace(0, 1, 101)
    pos = np.column_stack([t, 0 * t, 0 * t])
    pos[50:] += 10.0
    with pytest.raises(DomainError):
        count_self_intersections(Curve(t, pos, np.tile([1.0, 0, 0], (101, 1)), 0.01))
