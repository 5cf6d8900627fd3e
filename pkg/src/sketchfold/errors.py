"""Exception types shared across the package."""


class SketchfoldError(Exception):
    """Base class for all package errors."""


class InvalidCurveError(SketchfoldError):
    """Curve violates its invariants (too few points, duplicate points, bad labels)."""


class DimensionError(SketchfoldError):
    """Mismatched array sizes between paired inputs."""


class DegenerateShapeError(SketchfoldError):
    """Point set has no usable shape (coincident or collinear beyond recovery)."""


class ChainTooShortError(SketchfoldError):
    """Residue count below the minimum the metric is defined for."""


class PdbParseError(SketchfoldError):
    """Malformed PDB record.  Carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class EmptyStructureError(SketchfoldError):
    """No usable atoms found in the input."""


class PreconditionError(SketchfoldError):
    """Operation called on inputs that do not satisfy its contract."""


class ConfigError(SketchfoldError):
    """Invalid configuration values."""


class SamplingAborted(SketchfoldError):
    """A sampling trajectory failed mid-run.  Carries the step index."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"sampling aborted at step t={step}: {cause}")
        self.step = step
        self.cause = cause


class TrainingError(SketchfoldError):
    """Model training diverged or received inconsistent data."""
