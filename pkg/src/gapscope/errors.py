"""Exception types shared across gapscope."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class DegenerateOrbitError(DomainError):
    """An orbit collapses to fewer than two distinct points."""


class UnsupportedDimensionError(DomainError):
    pass


class CertificateFailure(Exception):
    """A many-gaps certificate check failed for index ``j``."""

    def __init__(self, j, check, message=""):
        self.j = j
        self.check = check
        super().__init__(message or f"certificate check {check!r} failed for j={j}")


class BoundViolation(AssertionError):
    """A proven bound was exceeded; ``instance`` holds the offending input."""

    def __init__(self, message, instance=None):
        self.instance = instance or {}
        super().__init__(message)


class StepSizeError(RuntimeError):
    """Constraint drift exceeded the pre-projection limit; use a smaller step."""


class SingularSurfaceError(RuntimeError):
    pass


class DegenerateOrbitWarning(UserWarning):
    pass


class ShootingWarning(UserWarning):
    """Boundary-value refinement did not converge; a chordal value was used."""
