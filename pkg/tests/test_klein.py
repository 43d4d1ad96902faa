import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapscope.errors import DomainError
from gapscope.flat import KleinQuotient, klein_curve, klein_geodesic_intersections
from gapscope.geodesic.intersections import count_self_intersections

F = Fraction


def unfold(K, P, Q, start, tau_max):
    """Cut the line start + tau (Q, P), 0 <= tau <= tau_max, into pieces of the
    fundamental square.  Each piece is (tau_a, tau_b, point at tau_a, direction)."""
    w, h = K.w, K.h
    x, y = K.canonical(start)
    dx, dy = F(Q), F(P)
    # sign bookkeeping: crossing x = w glides y -> -y
    pieces, tau = [], F(0)
    while tau < tau_max:
        exits = []
        if dx > 0:
            exits.append((w - x) / dx)
        if dy > 0:
            exits.append((h - y) / dy)
        if dy < 0:
            exits.append(-y / dy)
        step = min(exits + [tau_max - tau])
        pieces.append((tau, tau + step, (x, y), (dx, dy)))
        x, y, tau = x + step * dx, y + step * dy, tau + step
        if x == w:
            x, y, dy = F(0), h - y, -dy
        if y == h:
            y = F(0)
        elif y == 0 and dy < 0:
            y = h
    return pieces


def oracle_crossings(K, slope, length, start):
    P, Q = (int(c) for c in slope.split("/"))
    n2 = P * P + Q * Q
    tau_max = F(length) / F(math.isqrt(n2)) if math.isqrt(n2) ** 2 == n2 else None
    assert tau_max is not None
    pieces = unfold(K, P, Q, start, tau_max)
    found = set()
    for i, (a0, a1, pa, da) in enumerate(pieces):
        for b0, b1, pb, db in pieces[i + 1:]:
            det = da[0] * (-db[1]) - da[1] * (-db[0])
            if det == 0:
                continue
            rx, ry = pb[0] - pa[0], pb[1] - pa[1]
            u = (rx * (-db[1]) - ry * (-db[0])) / det
            v = (da[0] * ry - da[1] * rx) / det
            if 0 <= u <= a1 - a0 and 0 <= v <= b1 - b0:
                s, t = a0 + u, b0 + v
                if 0 < s < t < tau_max:
                    found.add((s, t))
    return found


@pytest.mark.parametrize("slope,length", [("3/4", 5), ("3/4", 10), ("4/3", 10), ("-3/4", 10),
                                          ("5/12", 26), ("12/5", 13), ("12/5", 39)])
def test_crossings_match_unfolding_oracle(slope, length):
    K = KleinQuotient(1, 1)
    start = (F(1, 7), F(1, 3))
    crossings, overlaps, _ = klein_geodesic_intersections(K, slope, length, start)
    got = {(c.s, c.t) for c in crossings}
    assert len(got) == len(crossings)
    assert got == oracle_crossings(K, slope, length, start)
    # the line closes up after one translation (Q, P) of even x-shift
    P, Q = (int(c) for c in slope.split("/"))
    expected = [(m * Q, m * P) for m in range(1, 5)
                if m * math.hypot(P, Q) < length and (m * Q) % 2 == 0]
    assert sorted(overlaps) == sorted(expected)


def test_crossing_points_coincide_in_the_quotient():
    K = KleinQuotient(1, 1)
    start = (F(1, 7), F(1, 3))
    crossings, _, _ = klein_geodesic_intersections(K, "3/4", 10, start)
    for c in crossings:
        ps = (start[0] + 4 * c.s, start[1] + 3 * c.s)
        pt = (start[0] + 4 * c.t, start[1] + 3 * c.t)
        assert K.sqdist(ps, pt) == 0
        assert c.cos_angle == F(16 - 9, 25)


def test_horizontal_glide_axis_is_simple():
    K = KleinQuotient(1, 1)
    crossings, overlaps, _ = klein_geodesic_intersections(K, "0/1", F(3, 2), (0, 0))
    assert crossings == []
    crossings, _, _ = klein_geodesic_intersections(K, "0/1", F(3, 2), (0, F(1, 5)))
    assert crossings == []


def test_vertical_line_one_period_is_simple():
    K = KleinQuotient(1, 1)
    crossings, overlaps, _ = klein_geodesic_intersections(K, "1/0", 1, (F(2, 7), 0))
    assert crossings == [] and overlaps == []


def test_count_grows_with_length():
    K = KleinQuotient(1, 1)
    counts = [len(klein_geodesic_intersections(K, "3/4", L, (F(1, 7), F(1, 3)))[0])
              for L in (2, 5, 10, 20)]
    assert counts == [1, 6, 24, 96]


def test_zero_slope_direction_rejected():
    with pytest.raises(DomainError):
        klein_geodesic_intersections(KleinQuotient(), "0/0", 1)
    with pytest.raises(DomainError):
        klein_geodesic_intersections(KleinQuotient(), "1/2", 0)


def test_numeric_counter_matches_exact_oracle():
    K = KleinQuotient(1, 1)
    start = (F(1, 7), F(1, 3))
    for L, expected in [(5, 6), (10, 24)]:
        crossings, _, _ = klein_geodesic_intersections(K, "3/4", L, start)
        curve = klein_curve(K, "3/4", L, start, h=1e-3)
        rep = count_self_intersections(curve)
        assert len(rep.records) == len(crossings) == expected
        exact = np.array(sorted((round(float(c.s) * 5, 6), round(float(c.t) * 5, 6), float(c.s) * 5,
                                 float(c.t) * 5) for c in crossings))[:, 2:]
        num = np.array(sorted((round(r.s, 6), round(r.t, 6), r.s, r.t) for r in rep.records))[:, 2:]
        assert np.allclose(exact, num, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.fractions(-3, 3, max_denominator=11), st.fractions(-3, 3, max_denominator=11),
       st.fractions(-3, 3, max_denominator=11), st.fractions(-3, 3, max_denominator=11))
def test_quotient_metric_properties(x1, y1, x2, y2):
    K = KleinQuotient(1, F(3, 2))
    p, q = (x1, y1), (x2, y2)
    assert K.sqdist(p, q) == K.sqdist(q, p)
    assert K.sqdist(p, K.act(3, -2, p)) == 0
    assert K.sqdist(K.act(1, 1, p), q) == K.sqdist(p, q)
    # never larger than the plain Euclidean distance of the lifts
    assert K.sqdist(p, q) <= (x1 - x2) ** 2 + (y1 - y2) ** 2
    # bounded by the diameter of the fundamental rectangle
    assert K.sqdist(p, q) <= F(1, 4) * (1 + F(9, 4))
