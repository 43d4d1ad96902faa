import itertools
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapscope.errors import DegenerateOrbitWarning, DomainError, UnsupportedDimensionError
from gapscope.flat import (
    TorusLattice,
    many_gaps_construction,
    odd_primes_upto,
    prime_tuples,
    torus_distance,
    torus_oracle,
    translation_orbit,
)
from gapscope.nnd import brute_force_spectrum

F = Fraction


def test_distance_examples():
    assert torus_distance(TorusLattice(sides=(1, 1)), (0, 0), (F(1, 2), F(1, 2))) == math.sqrt(0.5)
    L = TorusLattice(sides=(3, 5))
    assert L.sqdist((0, 0), (F(5, 2), 0)) == F(1, 4)
    assert L.sqdist((0, 0), (1, 0)) == 1


def test_general_lattice_limited_to_dimension_four():
    with pytest.raises(UnsupportedDimensionError):
        TorusLattice(basis=np.eye(5, dtype=int).tolist())
    with pytest.raises(DomainError):
        TorusLattice(basis=[[1, 2], [2, 4]])


def test_circle_orbit_as_one_torus():
    L = TorusLattice(sides=(1,))
    assert translation_orbit(L, (F(1, 3),), (0,), 2) == [(0,), (F(1, 3),), (F(2, 3),)]


def test_unit_step_visits_every_box_point():
    L = TorusLattice(sides=(3, 5))
    pts = translation_orbit(L, (1, 1), (0, 0), 14)
    assert sorted(pts) == sorted(itertools.product(range(3), range(5)))


def test_zero_translation_warns():
    L = TorusLattice(sides=(3, 5))
    with pytest.warns(DegenerateOrbitWarning):
        pts = translation_orbit(L, (3, 10), (0, 0), 4)
    assert len(set(pts)) == 1


def brute_sqdist(basis, d, R=4):
    """Minimum over all lattice vectors with coefficients in [-R, R]."""
    k = len(basis)
    best = None
    for z in itertools.product(range(-R, R + 1), repeat=k):
        v = [d[j] - sum(z[i] * basis[i][j] for i in range(k)) for j in range(k)]
        val = sum(c * c for c in v)
        if best is None or val < best:
            best = val
    return best


small = st.integers(-3, 3)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3),
       st.lists(st.fractions(-2, 2, max_denominator=7), min_size=3, max_size=3))
def test_general_enumeration_matches_brute_force(rows, d):
    B = np.array(rows)
    if abs(round(np.linalg.det(B))) < 1:
        return
    # keep the reduced cell moderate so the brute-force window suffices
    if np.abs(np.linalg.inv(B)).max() > 1:
        return
    L = TorusLattice(basis=rows)
    assert L.sqdist(d, (0, 0, 0)) == brute_sqdist(rows, d)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.fractions(-7, 7, max_denominator=9), min_size=2, max_size=2),
       st.lists(st.fractions(-7, 7, max_denominator=9), min_size=2, max_size=2))
def test_rectangular_matches_general_mode(x, y):
    rect = TorusLattice(sides=(3, 5))
    gen = TorusLattice(basis=[[3, 0], [0, 5]])
    assert rect.sqdist(x, y) == gen.sqdist(x, y)
    assert rect.sqdist(x, y) == rect.sqdist(y, x)
    assert rect.sqdist(rect.canonical(x), y) == rect.sqdist(x, y)


def test_canonical_lies_in_the_cell():
    L = TorusLattice(basis=[[2, 1], [0, 3]])
    for x in [(F(7, 2), F(-5, 3)), (F(-11), F(4)), (F(1, 5), F(2, 7))]:
        c = L.canonical(x)
        t = L.coefficients(c)
        assert all(0 <= ti < 1 for ti in t)
        assert L.sqdist(c, x) == 0


def test_prime_utilities():
    assert odd_primes_upto(20) == [3, 5, 7, 11, 13, 17, 19]
    tuples = list(prime_tuples(105))
    assert (3, 5, 7) in tuples and (3, 5) in tuples and (7,) in tuples
    assert all(math.prod(t) <= 105 for t in tuples)
    assert len(set(tuples)) == len(tuples)


def test_construction_indices_for_three_five():
    c = many_gaps_construction((3, 5))
    assert c.N == 15
    assert c.inverses == (2, 2)
    assert c.a == (10, 9)
    assert c.delta == (1, -1)
    assert c.s == F(1, 900)


def test_construction_distances_for_three_five():
    c = many_gaps_construction((3, 5), s=F(1, 900))
    sq = dict(zip(c.a, c.sqdists))
    assert sq[9] == F(9802, 10000)
    assert sq[10] == 1 - F(1, 45) + F(1, 4050)
    assert all(v < 1 for v in sq.values()) and sq[9] != sq[10]
    L = TorusLattice(sides=(3, 5))
    X = translation_orbit(L, c.v, (0, 0), 14)
    assert L.sqdist(X[10], X[0]) == sq[10]
    assert L.sqdist(X[9], X[0]) == sq[9]


def brute_orbit_count(primes, s):
    c = many_gaps_construction(primes, s, method="exact")
    L = TorusLattice(sides=primes)
    X = translation_orbit(L, c.v, (0,) * len(primes), c.N - 1)
    ref = brute_force_spectrum(X, torus_oracle(L))
    for aj in c.a:
        assert ref.neighbors[aj] == 0
    return ref.count


@pytest.mark.parametrize("primes,count", [((3, 5), 3), ((3, 7), 3), ((3, 5, 7), 4)])
def test_exact_certificate_against_brute_force(primes, count):
    c = many_gaps_construction(primes, method="exact")
    assert c.passed
    assert brute_orbit_count(primes, c.s) == c.nnd_count == count


@pytest.mark.parametrize("primes,count", [((3, 5), 3), ((3, 5, 7), 4), ((3, 7, 11), 4),
                                          ((5, 7, 11, 13), 5), ((3, 5, 7, 11, 13), 6)])
def test_integer_path_counts(primes, count):
    c = many_gaps_construction(primes, method="fast")
    assert c.passed and c.nnd_count == count


@pytest.mark.parametrize("primes", [(3, 5), (5, 7), (3, 5, 7), (3, 11, 13), (7, 11)])
def test_fast_and_exact_paths_agree(primes):
    fast = many_gaps_construction(primes, method="fast")
    exact = many_gaps_construction(primes, method="exact")
    assert fast.sqdists == exact.sqdists
    assert fast.nnd_values == exact.nnd_values
    assert fast.nearest_ok == exact.nearest_ok


def test_construction_rejects_bad_input():
    for bad in [(2, 3), (3, 3), (9,), ()]:
        with pytest.raises(DomainError):
            many_gaps_construction(bad)
    with pytest.raises(DomainError):
        many_gaps_construction((3, 5), s=F(1, 3), method="fast")


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(odd_primes_upto(60)), st.sampled_from(odd_primes_upto(60)))
def test_certificate_for_prime_pairs(p, q):
    if p == q:
        return
    c = many_gaps_construction((p, q))
    assert c.passed
    # x_{a_j} reduces coordinate-wise to delta_j e_j
    for j, aj in enumerate(c.a):
        red = [aj % r for r in c.primes]
        assert all(red[i] == 0 for i in range(2) if i != j)
        assert red[j] in (1, c.primes[j] - 1)
    assert 2 <= c.nnd_count <= 3 ** 2 + 1


def test_to_dict_uses_rational_strings():
    d = many_gaps_construction((3, 5)).to_dict()
    assert d["s"] == "1/900"
    assert d["sqdist"] == ["3961/4050", "4901/5000"]
    assert d["passed"] is True
