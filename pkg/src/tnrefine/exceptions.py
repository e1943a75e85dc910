"""Exception hierarchy shared by all submodules."""


class TNRefineError(Exception):
    """Base class for every error raised by this package."""


class InvalidEndpoint(TNRefineError, ValueError):
    pass


class NonPositiveBond(TNRefineError, ValueError):
    pass


class DuplicateEdge(TNRefineError, ValueError):
    pass


class CapacityExceeded(TNRefineError, ValueError):
    """More edges than the open-set bitmap can hold."""


class NodeReuse(TNRefineError, ValueError):
    pass


class DisconnectedForest(TNRefineError, ValueError):
    pass


class InvalidMove(TNRefineError, ValueError):
    pass


class TooSmall(TNRefineError, ValueError):
    pass


class TooLarge(TNRefineError, ValueError):
    pass


class UnreachableCap(TNRefineError, ValueError):
    """Slicing cannot bring the peak below the requested cap."""


class GenerationFailed(TNRefineError, RuntimeError):
    pass


class ParseError(TNRefineError, ValueError):
    pass


class LeafMismatch(TNRefineError, ValueError):
    pass


class OutOfMemoryBudget(TNRefineError, MemoryError):
    pass


class ShapeMismatch(TNRefineError, RuntimeError):
    pass
