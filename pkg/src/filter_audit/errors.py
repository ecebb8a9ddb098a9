"""Exception hierarchy shared by every module in the package."""


class FilterAuditError(Exception):
    """Base class for all package errors."""


class DomainError(FilterAuditError, ValueError):
    """A parameter or probability lies outside its admissible set."""


class SingularityError(DomainError):
    """Fisher information (or a density) is undefined at a boundary parameter."""


class InsufficientDataError(FilterAuditError, ValueError):
    """A feed is too short for the requested estimator."""


class ProtocolError(FilterAuditError):
    """A black-box oracle violated the feed-oracle contract."""


class AuditError(FilterAuditError):
    """The audit could not produce a verdict.

    ``estimate`` carries the offending parameter estimate when the failure
    came from an estimator landing on a non-finite value.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class WitnessNotFoundError(FilterAuditError):
    """No inflation constant up to the search cap makes the witness feasible."""


class ValidationError(FilterAuditError, ValueError):
    """An experiment plan, claim, or config value failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigParseError(FilterAuditError, ValueError):
    """The config document is not well formed."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
