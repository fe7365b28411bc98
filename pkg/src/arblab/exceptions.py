"""Exception hierarchy shared by every arblab module."""


class ArbError(Exception):
    """Base class for arblab errors."""


class ContractError(ArbError, ValueError):
    """An operation was called with inputs that violate its preconditions."""


class StationarityError(ContractError):
    """The autocorrelation operator does not contract (sup |rho_j| >= 1)."""


class EigenvalueTieError(ContractError):
    """Repeated eigenvalues: the one-dimensional eigenspace condition fails."""


class TruncationError(ContractError):
    """No admissible truncation level (all empirical eigenvalues vanish)."""


class UnsupportedOperation(ArbError):
    """The requested evaluation is not available for this configuration."""


class ConfigError(ArbError):
    """A run configuration is malformed or fails validation."""
