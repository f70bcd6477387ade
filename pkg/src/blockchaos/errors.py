"""Exception hierarchy.

Configuration problems map to CLI exit code 1, numerical failures to exit code 2.
"""


class BlockChaosError(Exception):
    """Base class for all package errors."""


class ConfigError(BlockChaosError, ValueError):
    """Invalid user-supplied configuration or arguments."""


class DimensionError(ConfigError):
    """Matrix or block dimensions are inconsistent."""


class ContractError(BlockChaosError, ValueError):
    """An input violates a structural precondition (Hermitian, circulant, ...)."""


class NumericalError(BlockChaosError, RuntimeError):
    """A numerical procedure failed (non-convergence, singular kernel).

    ``diagnostics`` carries whatever the failing routine knew at the time,
    e.g. the last residual of a fixed-point iteration.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
