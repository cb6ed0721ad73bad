"""Exception hierarchy shared by all subpackages.

The CLI maps these onto exit codes: validation problems exit with 2,
data problems with 3, numerical failures with 4.
"""


class SierError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SierError):
    """Arguments or configuration outside their allowed domain."""


class DataError(SierError):
    """Input data that cannot be used (shape mismatch, parse failure, ...)."""


class UnusableDesignError(DataError):
    """Every predictor column has zero variance."""


class DegenerateFitError(DataError):
    """All cross-validation fits exhausted the signal at zero components."""


class NumericalError(SierError):
    """A numerical routine failed to converge or produced an invalid result."""


class InternalConsistencyError(NumericalError):
    """An internal invariant (e.g. score orthonormality) was violated."""
