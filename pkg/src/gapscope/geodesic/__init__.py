"""Numerical geodesics on implicit surfaces."""

from .surfaces import Ellipsoid, ImplicitSurface, PlaneSurface, SphereSurface, TorusSurface, parse_surface
from .integrate import GeodesicTrajectory, integrate_geodesic, reversal_error, sample_geodesic
from .distance import intrinsic_distance
from .scan import bgc_scan, geodesic_nnd_spectrum, isolated_point_diagnostic
from .intersections import count_self_intersections, derivative_triple_analytic, derivative_triple_fd
from .jacobi import conjugate_points

__all__ = [
    "Ellipsoid", "ImplicitSurface", "PlaneSurface", "SphereSurface", "TorusSurface", "parse_surface",
    "GeodesicTrajectory", "integrate_geodesic", "reversal_error", "sample_geodesic",
    "intrinsic_distance", "bgc_scan", "geodesic_nnd_spectrum", "isolated_point_diagnostic",
    "count_self_intersections", "derivative_triple_analytic", "derivative_triple_fd",
    "conjugate_points",
]
