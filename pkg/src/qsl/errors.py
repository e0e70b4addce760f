"""Exception types shared across the package."""


class QslError(Exception):
    """Base class for all package-specific errors."""


class NotHermitianError(QslError, ValueError):
    """Matrix fails a Hermiticity check."""


class DimMismatchError(QslError, ValueError):
    """Operands have incompatible dimensions."""


class TooLargeError(QslError, ValueError):
    """System size exceeds a documented hard limit."""


class DegenerateFactorError(QslError, ValueError):
    """Cholesky-style factor has zero trace and cannot be normalized."""


class VersionMismatchError(QslError, ValueError):
    """Serialized artifact carries an unsupported format version."""


class ChecksumMismatchError(QslError, ValueError):
    """Stored CRC32 does not match the payload."""


class SchemaViolationError(QslError, ValueError):
    """Config or manifest fails schema validation."""


class GenerationError(QslError, RuntimeError):
    """Dataset generation could not satisfy its invariants."""
