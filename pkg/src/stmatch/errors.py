"""Exception hierarchy shared across the package."""


class StMatchError(Exception):
    """Base class for every error raised by stmatch."""


class NetworkFormatError(StMatchError):
    """A network file is malformed (bad geometry, duplicate id, bad number)."""


class NetworkStructureError(StMatchError):
    """A network refers to something that does not exist."""


class ImputationError(StMatchError):
    def __init__(self, edge_ids):
        self.edge_ids = list(edge_ids)
        shown = ", ".join(self.edge_ids[:10])
        more = "" if len(self.edge_ids) <= 10 else f" (+{len(self.edge_ids) - 10} more)"
        super().__init__(f"speed limit unresolved for edges: {shown}{more}")


class UnreachableError(StMatchError):
    """No directed path exists between two on-edge positions."""


class TrajectoryFormatError(StMatchError):
    """A trajectory or polygon file is malformed."""


class ConfigError(StMatchError):
    """Invalid configuration or parameters."""


class ContractError(StMatchError, ValueError):
    """A function was called with arguments outside its domain."""


class MatchFailure(StMatchError):
    """A trajectory could not be matched.

    ``gps_index`` is set when a point had no candidates; ``layer_pair`` when
    no feasible transition joins two consecutive layers.
    """

    def __init__(self, message, gps_index=None, layer_pair=None):
        super().__init__(message)
        self.gps_index = gps_index
        self.layer_pair = layer_pair


class StatisticsError(StMatchError, ValueError):
    pass


class UsageError(StMatchError):
    """Inputs are individually valid but cannot be used together."""
