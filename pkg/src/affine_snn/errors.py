"""Exception hierarchy shared across the package."""


class AffineSnnError(Exception):
    """Base class for all errors raised by affine_snn."""


class GraphError(AffineSnnError, ValueError):
    pass


class CycleDetected(GraphError):
    pass


class IsolatedNode(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class NoSpike(AffineSnnError):
    """A general-weight neuron whose potential never reaches the threshold.

    ``node`` is filled in by the forward pass when the failing neuron is known.
    """

    def __init__(self, message="potential never reaches threshold", node=None):
        self.node = node
        if node is not None:
            message = f"{message} (node {node})"
        super().__init__(message)


class DimensionMismatch(AffineSnnError, ValueError):
    pass


class SingularSimplex(AffineSnnError, ValueError):
    pass


class BadMagic(AffineSnnError, ValueError):
    pass


class TruncatedFile(AffineSnnError, ValueError):
    pass


class ConfigError(AffineSnnError, ValueError):
    pass
