"""Exception hierarchy.

``SchemaError`` subclasses signal bad input documents (CLI exit code 2);
``NumericalError`` subclasses signal failures inside the numerics (exit 3).
"""


class CorrNoiseError(Exception):
    """Base class for every error raised by the package."""


class SchemaError(CorrNoiseError):
    pass


class NumericalError(CorrNoiseError):
    pass


class DomainError(CorrNoiseError, ValueError):
    """A scalar argument is outside its admissible range (e.g. ``|xi| > 1``)."""


class NonStationary(NumericalError):
    """The drift matrix has an eigenvalue with non-positive real part."""


class IllConditioned(NumericalError):
    pass


class SingularResolvent(NumericalError):
    pass


class FactorizationFailure(NumericalError):
    """The Wiener correlation matrix is not positive semidefinite."""


class StepTooLarge(NumericalError):
    pass


class DimensionMismatch(NumericalError, ValueError):
    pass


class BasisMismatch(NumericalError, ValueError):
    pass


class NotPSD(NumericalError):
    pass


class UnresolvedPeak(NumericalError):
    """The optical response did not decay within the time grid."""


class MissingReference(CorrNoiseError, ValueError):
    pass


class GridMismatch(CorrNoiseError, ValueError):
    pass


class SchemaViolation(SchemaError):
    """Collects every problem found in a scenario document.

    Parameters
    ----------
    violations : list of (path, message)
        ``path`` is a dotted/indexed location such as ``xi_sweep[0]``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{path}: {msg}" for path, msg in self.violations]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))


class SweepFailure(NumericalError):
    """One or more sweep points failed; the others were written.

    ``failures`` holds ``(point_label, exception)`` pairs and ``manifest`` the
    manifest describing the partial results.
    """

    def __init__(self, failures, manifest=None):
        self.failures = list(failures)
        self.manifest = manifest
        lines = [f"{label}: {type(exc).__name__}: {exc}" for label, exc in self.failures]
        super().__init__("sweep points failed:\n  " + "\n  ".join(lines))
