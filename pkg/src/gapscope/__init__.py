"""Nearest-neighbour distance spectra of isometry orbits and geodesic samples."""

__version__ = "0.1.0"
