"""Exception hierarchy shared across the package."""


class EPMError(Exception):
    """Base class for all errors raised by :mod:`epm`."""


class LookupFailure(EPMError, KeyError):
    """A run references an instance or configuration id that is not known."""

    def __str__(self):
        return Exception.__str__(self)


class SchemaError(EPMError, ValueError):
    """Input tables are inconsistent (arity, column names, kinds)."""


class DomainError(EPMError, ValueError):
    """A value lies outside the domain allowed for it."""


class EncodingError(DomainError):
    """A categorical value is not part of its declared domain."""


class EmptyPredictorError(EPMError, ValueError):
    """Every predictor column was constant and got discarded."""


class SingularMatrixError(EPMError, ValueError):
    """A linear system could not be solved because its matrix is singular."""


class ConfigurationError(EPMError, ValueError):
    """A procedure was asked to run with settings the data cannot support."""


class TrainingError(EPMError, RuntimeError):
    """Model fitting diverged or produced non-finite values."""


class NumericalError(EPMError, RuntimeError):
    """A factorization failed even after jitter escalation."""


class UndefinedCorrelationError(EPMError, ValueError):
    """Correlation requested for a constant vector."""


class OptimizationError(EPMError, RuntimeError):
    """The objective returned no finite value at any evaluated point."""


class ModelFormatError(EPMError, ValueError):
    """A serialized model stream is truncated, corrupt or of another version."""


class ParseError(EPMError, ValueError):
    """An input file could not be parsed.

    ``line`` carries the 1-based line number of the offending line, if known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        parts = [str(path)] if path is not None else []
        if line is not None:
            parts.append(f"line {line}")
        where = ", ".join(parts)
        super().__init__(f"{where}: {message}" if where else message)
