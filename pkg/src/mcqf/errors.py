"""Exception types shared across the package."""


class McqfError(Exception):
    """Base class for all package errors."""


class InvalidParams(McqfError):
    """A generator or configuration parameter is out of range."""


class DisconnectedGraph(McqfError):
    """Random topology generation failed to produce a connected graph."""


class NodeNotFound(McqfError):
    """A referenced node id does not exist in the network."""


class NoPath(McqfError):
    """Source and destination are not connected."""


class InsufficientEndStations(McqfError):
    """The network does not have enough end stations to host flows."""


class NonDivisible(McqfError):
    """The hyperperiod is not a multiple of a flow period."""


class InvalidSplits(McqfError):
    """Flow-to-queue-group split fractions are not positive or do not sum to 1."""


class InvalidConfig(McqfError):
    """A queue-group configuration violates a cycle constraint (C6..C10)."""

    def __init__(self, constraint: str, message: str):
        self.constraint = constraint
        super().__init__(f"{constraint}: {message}")


class NoFeasibleCombination(McqfError):
    """No cycle triple satisfies the combination constraints."""
