from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapscope.circle import circle_oracle
from gapscope.errors import DegenerateOrbitError, DomainError
from gapscope.flat import TorusLattice, many_gaps_construction, torus_oracle, translation_orbit
from gapscope.nnd import (
    EXACT,
    ClusterPolicy,
    MetricOracle,
    brute_force_spectrum,
    cluster_keys,
    make_spectrum,
    nnd_of_point,
    nnd_spectrum,
    orbit_spectrum,
    read_points,
    write_points,
)

F = Fraction


def line_oracle(exact=True):
    return MetricOracle(lambda x, y: abs(x - y), exact=exact)


def test_two_points_share_their_distance():
    X = [F(0), F(3, 7)]
    s = nnd_spectrum(X, line_oracle())
    assert s.keys == (F(3, 7), F(3, 7))
    assert s.count == 1


def test_nnd_of_point_on_equilateral_circle_triple():
    X = [F(0), F(1, 3), F(2, 3)]
    key, arg = nnd_of_point(F(0), X, circle_oracle())
    assert key == F(1, 3)
    assert arg == 1  # tie between 1/3 and 2/3 goes to the lower index


def test_nnd_of_point_in_many_gaps_orbit():
    cert = many_gaps_construction((3, 5), s=F(1, 900), method="exact")
    L = TorusLattice(sides=(3, 5))
    X = translation_orbit(L, cert.v, (0, 0), 14)
    key, arg = nnd_of_point(X[10], X, torus_oracle(L))
    assert key == 1 - 2 * 10 * F(1, 900) + 2 * (10 * F(1, 900)) ** 2
    assert arg == 0
    assert abs(key ** 0.5 - 0.988951) < 1e-6


def test_equally_spaced_circle_points_form_one_class():
    X = [F(i, 3) for i in range(3)]
    assert nnd_spectrum(X, circle_oracle()).count == 1


def test_four_point_circle_orbit_classes():
    X = [F(0), F(3, 10), F(6, 10), F(9, 10)]
    s = nnd_spectrum(X, circle_oracle())
    assert sorted(c.key for c in s.classes) == [F(1, 10), F(3, 10)]
    assert s.keys == (F(1, 10), F(3, 10), F(3, 10), F(1, 10))


def test_fewer_than_two_points_rejected():
    with pytest.raises(DomainError):
        nnd_spectrum([F(0)], line_oracle())
    with pytest.raises(DomainError):
        nnd_of_point(F(0), [F(0)], line_oracle())


def test_point_not_in_set_rejected():
    with pytest.raises(DomainError):
        nnd_of_point(F(1), [F(0), F(2)], line_oracle())


def test_bad_policy_rejected():
    with pytest.raises(DomainError):
        ClusterPolicy("fuzzy")
    with pytest.raises(DomainError):
        ClusterPolicy("tolerance", tau=0)


def test_tolerance_merges_within_tau_only():
    keys = [1.0, 1.0 + 5e-10, 1.0 + 3e-9, 2.0]
    classes, idx = cluster_keys(keys, ClusterPolicy(tau=1e-9))
    assert len(classes) == 3
    assert idx[0] == idx[1] != idx[2]


def test_csv_export_shows_exact_squared_keys():
    s = make_spectrum([F(1, 2), F(1, 2)], [1, 0], EXACT, squared=True)
    assert s.to_csv().splitlines() == ["point_index,nnd_value,class_index", "0,sqrt(1/2),0", "1,sqrt(1/2),0"]


def test_point_file_round_trip():
    text = "# header\n1/3, 0.25\n2 -7/5\n"
    pts = read_points(text)
    assert pts == [(F(1, 3), F(1, 4)), (F(2), F(-7, 5))]
    assert read_points(write_points(pts)) == pts
    with pytest.raises(DomainError):
        read_points("1 2\n3\n")


def test_orbit_spectrum_rejects_fixed_point():
    with pytest.raises(DegenerateOrbitError):
        orbit_spectrum([F(0), F(0)])


def test_orbit_spectrum_collapses_periodic_orbit():
    # x_0..x_5 on the circle with rotation 1/3: residues repeat after 3 steps
    D = [min(F(m, 3) % 1, 1 - F(m, 3) % 1) for m in range(1, 6)]
    s = orbit_spectrum(D)
    assert len(s.keys) == 3
    assert s.count == 1


rationals = st.fractions(min_value=0, max_value=1, max_denominator=60)


@settings(max_examples=60, deadline=None)
@given(st.lists(rationals, min_size=2, max_size=25, unique=True))
def test_symmetric_loop_matches_brute_force(X):
    m = circle_oracle()
    fast = nnd_spectrum(X, m)
    ref = brute_force_spectrum(X, m)
    assert fast.keys == ref.keys
    assert fast.neighbors == ref.neighbors
    assert fast.count == ref.count


@settings(max_examples=60, deadline=None)
@given(st.lists(rationals, min_size=2, max_size=25, unique=True))
def test_exact_and_tolerance_modes_agree_below_separation(X):
    exact = nnd_spectrum(X, circle_oracle())
    vals = sorted({float(c.key) for c in exact.classes})
    sep = min((b - a for a, b in zip(vals, vals[1:])), default=1.0)
    tol = nnd_spectrum([float(x) for x in X], circle_oracle(exact=False), ClusterPolicy(tau=sep / 10))
    assert tol.count == exact.count


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 97), st.integers(2, 97), st.integers(1, 60))
def test_orbit_spectrum_matches_brute_force(a, b, n):
    p = F(a, b)
    X = [(i * p) % 1 for i in range(n + 1)]
    if len(set(X)) < len(X):
        return
    D = [min((m * p) % 1, 1 - (m * p) % 1) for m in range(1, n + 1)]
    s = orbit_spectrum(D)
    ref = brute_force_spectrum(X, circle_oracle())
    assert s.keys == ref.keys
    assert s.neighbors == ref.neighbors


def test_vectorised_path_matches_loop():
    rng = np.random.default_rng(3)
    X = rng.random((40, 2))
    m = MetricOracle(lambda x, y: float(np.linalg.norm(x - y)),
                     pairwise=lambda X: np.linalg.norm(X[:, None] - X[None], axis=-1))
    loop = nnd_spectrum(list(X), MetricOracle(m.dist))
    vec = nnd_spectrum(X, m)
    assert np.allclose(loop.distances(), vec.distances(), rtol=0, atol=1e-15)
    assert loop.neighbors == vec.neighbors
