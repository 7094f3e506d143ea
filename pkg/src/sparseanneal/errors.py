"""Exception types shared across the package."""


class SparseAnnealError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(SparseAnnealError, ValueError):
    """Invalid model or schedule parameters."""


class ConfigError(SparseAnnealError, ValueError):
    """Invalid experiment configuration."""


class FormatError(SparseAnnealError):
    """Malformed, truncated, or inconsistent instance file."""


class InfeasibleSupportError(SparseAnnealError):
    """Requested support has more active columns than measurements."""


class SingularSupportError(SparseAnnealError):
    """Restricted Gram matrix is numerically singular at full factorization."""


class DegenerateColumnError(SparseAnnealError):
    """Adding the column would make the Gram matrix numerically singular.

    Raised when the Schur complement of the bordered Gram update falls at or
    below the pivot threshold; callers treat the candidate as infeasible.
    """


class OracleBudgetError(SparseAnnealError):
    """Exhaustive enumeration would exceed the configured support budget."""


class ExperimentFailureError(SparseAnnealError):
    """Too many per-sample failures to report a trustworthy aggregate."""
