"""Exception hierarchy.

``ConfigError`` covers anything wrong with the inputs; the CLI maps it to
exit status 2. Everything raised by a numerical routine on otherwise valid
input derives from ``ComputeError`` (exit status 1).
"""


class EraserSimError(Exception):
    pass


class ConfigError(EraserSimError, ValueError):
    """Invalid geometry, run configuration or detector request."""


class ComputeError(EraserSimError):
    pass


class DomainError(ComputeError, ValueError):
    """Argument outside the domain of a field or statistic."""


class PhaseUndefined(ComputeError):
    """Phase requested where the amplitude vanishes."""


class NodeError(ComputeError):
    """A trajectory ran into a node of its guiding wave."""


class StepError(ComputeError):
    """Integration step too coarse for the local velocity."""


class NormError(ComputeError, ValueError):
    """State vector is not normalized."""
