"""Exception types shared across the package."""


class PushSumError(Exception):
    """Base class for all package errors."""


class GraphError(PushSumError):
    pass


class SelfLoopError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class NotStronglyConnectedError(GraphError):
    pass


class TooFewNodesError(GraphError):
    pass


class StatsError(PushSumError):
    pass


class OutOfSupportError(StatsError):
    pass


class SupportMismatchError(StatsError):
    pass


class QuadratureFailureError(StatsError):
    pass


class ScheduleError(PushSumError):
    pass


class DimensionMismatchError(ScheduleError):
    pass


class ProtocolError(PushSumError):
    pass


class NonpositiveWeightError(ProtocolError):
    """Push-sum weight became non-positive; indicates a corrupted trace."""


class StaleTickError(ProtocolError):
    pass


class SizeMismatchError(ProtocolError):
    pass


class AnalysisError(PushSumError):
    pass


class DegenerateBoundError(AnalysisError):
    pass


class WindowTooShortError(AnalysisError):
    pass


class HistoryMissingError(AnalysisError):
    pass


class ConfigError(PushSumError):
    """Invalid experiment configuration; message names the offending key."""


class RunError(PushSumError):
    pass
