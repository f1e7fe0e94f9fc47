"""Exception hierarchy shared across the package."""


class RotConsensusError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RotConsensusError, ValueError):
    """Matrix or vector shapes do not fit together."""


class ContractError(RotConsensusError, ValueError):
    """An input violates a structural precondition (e.g. symmetry)."""


class NotPSDError(RotConsensusError, ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class GraphError(RotConsensusError, ValueError):
    """Invalid graph definition (self loop, duplicate edge, disconnected...)."""


class StressSynthesisError(RotConsensusError):
    """No PSD stress of the required rank was found.

    ``achieved_rank`` is the number of positive eigenvalues of the best
    candidate stress, ``required_rank`` the target ``n - d - 1``.
    """

    def __init__(self, message, achieved_rank, required_rank):
        super().__init__(message)
        self.achieved_rank = achieved_rank
        self.required_rank = required_rank


class DegenerateSystemError(RotConsensusError, ValueError):
    """The pinned system has no free agents."""


class FitError(RotConsensusError, ValueError):
    """Decay-rate fit impossible on the given trace."""


class ConfigError(RotConsensusError, ValueError):
    """Scenario configuration is malformed or inconsistent."""
