"""Exception types shared across the library."""


class InvalidInputError(ValueError):
    """An argument failed a basic validity check (non-finite, wrong shape, ...)."""


class InvalidConfigError(ValueError):
    """A configuration object is internally inconsistent or out of range."""


class EnumerationLimitError(ValueError):
    """A brute-force oracle was asked for an instance too large to enumerate."""


class NumericFailureError(RuntimeError):
    """An iterative routine produced non-finite values or a factorization failed."""


class DegenerateScoresError(RuntimeError):
    """All removal scores vanished even though the certificate did not hold."""
