"""Exception types shared across the package."""


class StrictSimplicityError(ValueError):
    """A point configuration has tied coordinates or points on the axes."""


class InvalidMeasureError(ValueError):
    """A measure violates nonnegativity, finiteness or continuity checks."""


class InvalidAvoidanceError(InvalidMeasureError):
    """A scalar field is not the avoidance function of a valid hazard measure."""


class SingularHazardError(ValueError):
    """A hazard denominator vanishes on the evaluation range."""


class MeasurabilityError(ValueError):
    """A test functional tried to read outside its declared region."""


class UnsupportedModelError(ValueError):
    """The requested operation has no analytic route for this model."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class InvariantViolation(RuntimeError):
    """An internal consistency check failed; indicates an implementation bug."""
