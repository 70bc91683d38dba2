"""Exception types shared across the package.

Invalid arguments raise plain ValueError; the classes here mark states a
caller may want to catch and handle (solver stagnation, guard rejection,
frame ambiguity) rather than misuse of the API.
"""


class HPlateauError(Exception):
    """Base class for package-specific failures."""


class ConePreconditionError(HPlateauError, ValueError):
    """A curvature vector lies outside the Garding cone an operation requires."""


class DegenerateSpectrumError(HPlateauError):
    """Top eigenvalue not simple within tolerance; derivative formulas undefined."""


class AmbiguousFrameError(HPlateauError):
    """Principal directions not determined by the spectrum at this point."""


class InvalidHeightError(HPlateauError, ValueError):
    """Graph height must be strictly positive in the half-space model."""


class NewtonDivergenceError(HPlateauError):
    """Residual was not reduced after backtracking down to the damping floor.

    Carries the last iterate so callers can inspect how far the solve got:
    ``state`` is the raw height vector, ``field`` (when set by the
    continuation driver) the assembled solution field.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
        self.field = None


class ConeViolationError(HPlateauError):
    """Cone guard rejected every damped step down to the floor."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
        self.field = None


class GridDegeneracyError(HPlateauError, ValueError):
    """The radial map of a star-shaped domain is degenerate on the mesh."""


class AuditPreconditionError(HPlateauError):
    """A solution field does not satisfy the preconditions of an audit check."""
