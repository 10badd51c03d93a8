"""Exception hierarchy shared by every evoset module."""


class EvosetError(Exception):
    """Base class for all evoset errors."""


class UnknownVertexError(EvosetError, KeyError):
    pass


class HorizonError(EvosetError, ValueError):
    """A time index fell outside ``[0, horizon]``."""


class InvalidStateError(EvosetError, ValueError):
    """A walk or set occupies a vertex with zero vertex conductance."""


class NonMonotoneError(EvosetError, ValueError):
    """Vertex conductances decrease where the construction needs them non-decreasing."""


class CapExceededError(EvosetError, ValueError):
    """Graph too large for an exact (enumerative or dense) computation."""


class ConfigError(EvosetError, ValueError):
    """Experiment configuration failed validation.

    ``field`` names the offending config key (dotted path).
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
