import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapscope.errors import DomainError
from gapscope.geodesic.surfaces import (
    Ellipsoid,
    PlaneSurface,
    SphereSurface,
    TorusSurface,
    generic_gauss_curvature,
    parse_surface,
)

SURFACES = [SphereSurface(), SphereSurface(2.0), Ellipsoid(1, 1.2, 1.5), Ellipsoid(1, 1, 1.5),
            TorusSurface(2, 1), TorusSurface(3, 0.5)]


def random_point(S, rng):
    x = rng.standard_normal(3)
    if isinstance(S, TorusSurface):
        phi, th = rng.uniform(0, 2 * math.pi, 2)
        return np.array([(S.R + S.r * math.cos(th)) * math.cos(phi),
                         (S.R + S.r * math.cos(th)) * math.sin(phi), S.r * math.sin(th)])
    return np.array(S.project(*(x / np.linalg.norm(x)), iters=50))


@pytest.mark.parametrize("S", SURFACES, ids=repr)
def test_analytic_curvature_matches_generic_formula(S):
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = random_point(S, rng)
        assert S.gauss_curvature(*p) == pytest.approx(generic_gauss_curvature(S, *p), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("S", SURFACES, ids=repr)
def test_derivatives_match_finite_differences(S):
    rng = np.random.default_rng(1)
    eps = 1e-6
    for _ in range(20):
        p = random_point(S, rng)
        g = np.array(S.grad(*p))
        fd = np.array([(S.value(*(p + eps * e)) - S.value(*(p - eps * e))) / (2 * eps) for e in np.eye(3)])
        assert np.allclose(g, fd, atol=1e-7)
        H = S.hessian(*p)
        fdH = np.array([(np.array(S.grad(*(p + eps * e))) - np.array(S.grad(*(p - eps * e)))) / (2 * eps)
                        for e in np.eye(3)])
        assert np.allclose(H, fdH, atol=1e-6)
        v = rng.standard_normal(3)
        assert S.hess_quad(*p, *v) == pytest.approx(v @ H @ v, rel=1e-10, abs=1e-12)


def test_curvature_closed_forms():
    assert SphereSurface(2.0).gauss_curvature(2, 0, 0) == pytest.approx(0.25)
    T = TorusSurface(2, 1)
    assert T.gauss_curvature(3, 0, 0) == pytest.approx(1 / 3)
    assert T.gauss_curvature(1, 0, 0) == pytest.approx(-1.0)
    assert T.gauss_curvature(2, 0, 1) == pytest.approx(0.0, abs=1e-15)
    E = Ellipsoid(1, 2, 3)
    # principal curvatures c/a^2 and c/b^2 at the pole (0, 0, c)
    assert E.gauss_curvature(0, 0, 3) == pytest.approx(9 / 4)
    assert E.gauss_curvature(1, 0, 0) == pytest.approx(1 / (4 * 9))
    assert PlaneSurface().gauss_curvature(1, 2, 0) == 0.0


def test_ellipsoid_max_curvature_and_injectivity_bound():
    E = Ellipsoid(1, 1.2, 1.5)
    rng = np.random.default_rng(2)
    ks = [E.gauss_curvature(*random_point(E, rng)) for _ in range(2000)]
    assert max(ks) <= E.max_curvature() * (1 + 1e-12)
    assert E.injectivity_bound() == pytest.approx(math.pi / math.sqrt(E.max_curvature()))
    assert SphereSurface().injectivity_bound() == pytest.approx(math.pi)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_projection_lands_on_ellipsoid(x, y, z):
    if x * x + y * y + z * z < 0.1:
        return
    E = Ellipsoid(1, 1.2, 1.5)
    p = E.project(x, y, z, iters=60)
    assert abs(E.value(*p)) < 1e-12


def test_tangent_basis_is_orthonormal():
    E = Ellipsoid(1, 1.2, 1.5)
    p = random_point(E, np.random.default_rng(3))
    e1, e2 = E.tangent_basis(p)
    g = np.array(E.grad(*p))
    assert abs(e1 @ e2) < 1e-15 and abs(e1 @ g) < 1e-14 and abs(e2 @ g) < 1e-14
    assert np.linalg.norm(e1) == pytest.approx(1) and np.linalg.norm(e2) == pytest.approx(1)


def test_parse_surface():
    assert parse_surface("sphere") == SphereSurface()
    assert parse_surface("ellipsoid:1,1.2,1.5") == Ellipsoid(1, 1.2, 1.5)
    assert isinstance(parse_surface("torus:2,1"), TorusSurface)
    assert isinstance(parse_surface("plane"), PlaneSurface)
    for bad in ["cube", "ellipsoid:1,2"]:
        with pytest.raises(DomainError):
            parse_surface(bad)
