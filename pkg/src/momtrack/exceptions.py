"""Exception types raised by the simulator."""


class MomtrackError(Exception):
    """Base class for all simulator errors."""


class ConfigError(MomtrackError, ValueError):
    """Invalid configuration value. The message names the offending field."""


class TopologyError(ConfigError):
    pass


class MixingMatrixError(MomtrackError, ValueError):
    """A matrix violates the mixing-matrix invariants."""


class SpectralGapError(MomtrackError, ValueError):
    """The mixing matrix does not contract toward consensus."""


class DivergenceError(MomtrackError, FloatingPointError):
    """A non-finite value appeared in the swarm state.

    Attributes:
        round: round index at which the non-finite value was produced.
        node: 0-based node index of the first offending node, or None when
            the overflow only shows up in an aggregate metric.
        field: one of ``"x"``, ``"u"``, ``"c"``, ``"metrics"``.
    """

    def __init__(self, round: int, node: int | None, field: str):
        self.round = round
        self.node = node
        self.field = field
        where = field if node is None else f"{field} of node {node}"
        super().__init__(f"non-finite value in {where} at round {round}")
