import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapscope.errors import DomainError
from gapscope.packing import (
    default_center,
    euclidean_packing_bound,
    greedy_packing,
    hyperbolic_monotonicity_scan,
    nnd_bound_from_packing,
    sample_ball,
    verify_packing,
)
from gapscope.spaces import Euclidean, Hyperbolic, ProjectiveSpace, Sphere

E1, E2, S2, H2 = Euclidean(1), Euclidean(2), Sphere(2), Hyperbolic(2, -1.0)


def test_two_points_fit_in_an_interval():
    assert verify_packing(E1, [0.0], 1.0, [[-0.9], [0.5]]).ok


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.999, 0.999), min_size=3, max_size=3))
def test_three_points_never_fit_in_an_interval(xs):
    assert not verify_packing(E1, [0.0], 1.0, [[x] for x in xs]).ok


def test_pentagon_certificate():
    pts = [[0.95 * math.cos(2 * math.pi * i / 5), 0.95 * math.sin(2 * math.pi * i / 5)] for i in range(5)]
    cert = verify_packing(E2, [0.0, 0.0], 1.0, pts)
    assert cert.ok
    assert cert.min_pair == pytest.approx(1.9 * math.sin(math.pi / 5), rel=1e-12)


def test_violations_are_reported():
    cert = verify_packing(E2, [0, 0], 1.0, [[0, 0], [0.5, 0]])
    assert not cert.ok and cert.violation is not None
    cert = verify_packing(E2, [0, 0], 1.0, [[1.0, 0.0]])
    assert not cert.ok  # the ball is open


def test_exact_verification_rejects_one_ulp_short_pair():
    a = 0.0
    b = np.nextafter(1.0, 0.0)
    assert not verify_packing(E1, [0.0], 1.0, [[a - 0.5], [b - 0.5]]).ok


def test_euclidean_bound():
    assert euclidean_packing_bound(1) == 3
    assert euclidean_packing_bound(2) == 9
    with pytest.raises(DomainError):
        euclidean_packing_bound(0)


def test_nnd_bound():
    assert nnd_bound_from_packing(2) == 3
    assert nnd_bound_from_packing(9) == 10
    assert nnd_bound_from_packing(1) == 2
    with pytest.raises(DomainError):
        nnd_bound_from_packing(0)


@pytest.mark.parametrize("S", [E2, Euclidean(3), S2, ProjectiveSpace(2), H2, Hyperbolic(3, -4.0)])
def test_samples_stay_in_the_open_ball(S):
    rng = np.random.default_rng(0)
    c = default_center(S)
    r = 0.8
    X = sample_ball(S, c, r, 500, rng)
    d = np.array([S.distance(c, x) for x in X])
    assert np.all(d < r)


def test_sphere_cap_sampling_is_volume_uniform():
    # fraction of a cap of radius r lying within radius r/2 is (1 - cos(r/2)) / (1 - cos r)
    rng = np.random.default_rng(1)
    c = default_center(S2)
    r = 2.0
    X = sample_ball(S2, c, r, 20000, rng)
    d = np.arccos(np.clip(X @ c, -1, 1))
    frac = np.mean(d < r / 2)
    expect = (1 - math.cos(r / 2)) / (1 - math.cos(r))
    assert abs(frac - expect) < 0.015


def test_hyperbolic_sampling_is_volume_uniform():
    rng = np.random.default_rng(2)
    c = H2.origin()
    r = 3.0
    X = sample_ball(H2, c, r, 20000, rng)
    d = np.array([H2.distance(c, x) for x in X])
    expect = (math.cosh(r / 2) - 1) / (math.cosh(r) - 1)
    assert abs(np.mean(d < r / 2) - expect) < 0.01


def test_interval_greedy_finds_two():
    res = greedy_packing(E1, r=1.0, trials=100, seed=0)
    assert res.count == 2 and res.certificate.ok


def test_plane_greedy_finds_pentagon_and_respects_bound():
    res = greedy_packing(E2, r=1.0, trials=200, seed=0)
    assert 5 <= res.count <= 9
    assert res.certificate.ok


def test_full_sphere_radius_gives_one():
    assert greedy_packing(S2, r=math.pi, trials=20, seed=0).count == 1


def test_greedy_is_deterministic():
    a = greedy_packing(Euclidean(3), r=1.0, trials=10, seed=3)
    b = greedy_packing(Euclidean(3), r=1.0, trials=10, seed=3)
    assert a.to_dict() == b.to_dict()
    assert a.count <= 27


@pytest.mark.parametrize("S", [Euclidean(2), Euclidean(3), S2])
def test_greedy_never_exceeds_volume_bound(S):
    for seed in range(3):
        for r in (0.3, 1.0, 2.5):
            assert greedy_packing(S, r=r, trials=5, seed=seed).count <= 3 ** S.k


def test_small_hyperbolic_ball_looks_euclidean():
    h = greedy_packing(H2, r=1 / 64, trials=200, seed=0).count
    e = greedy_packing(E2, r=1 / 64, trials=200, seed=0).count
    assert h == e == 5


def test_hyperbolic_scan_is_monotone():
    res = hyperbolic_monotonicity_scan(-1.0, 2, (1, 2, 4, 8), trials=10, seed=0)
    counts = [r.count for r in res]
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    assert all(r.certificate.ok for r in res)


def test_scan_input_checks():
    with pytest.raises(DomainError):
        hyperbolic_monotonicity_scan(0.0, 2, (1, 2))
    with pytest.raises(DomainError):
        hyperbolic_monotonicity_scan(-1.0, 2, (2, 1))
    assert len(hyperbolic_monotonicity_scan(-1.0, 2, (1.0,), trials=2)) == 1
