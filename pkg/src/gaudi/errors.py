"""Exception hierarchy shared across the package."""


class GaudiError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GaudiError):
    """Operands have incompatible dimensions."""


class ContractError(GaudiError):
    """A documented precondition was violated by the caller."""


class DegenerateInputError(ContractError):
    """Input is structurally valid but numerically degenerate (e.g. zero variance)."""


class TrainingError(GaudiError):
    """Non-finite values encountered during optimization."""


class FormatError(GaudiError):
    """A file does not conform to its documented format."""


class ParseError(FormatError):
    """A file failed to parse; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(GaudiError):
    """Invalid configuration (CLI flags, config file, or checkpoint mismatch)."""


class UndefinedCorrelationError(ContractError):
    """Correlation requested on a constant vector."""
