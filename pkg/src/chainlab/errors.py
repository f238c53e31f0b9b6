"""Exception hierarchy shared by every chainlab module."""


class ChainError(ValueError):
    """Base class for invalid chain input."""


class DimensionMismatch(ChainError):
    pass


class NotStochastic(ChainError):
    """A matrix or vector failed the (sub)stochasticity check it needed."""


class DomainError(ChainError):
    """An argument lies outside the domain of a closed-form bound."""


class ChainIndexError(IndexError):
    """A time index falls outside the window and no extension rule covers it."""


class InternalConsistencyError(AssertionError):
    """Two computations that must agree did not. Always a bug, never bad input."""
