"""
Exception hierarchy for the neural-network layer.
"""


class NNError(Exception):
    """Base exception for network construction, evaluation and persistence."""
    pass


class ShapeError(NNError):
    """Input or parameter shape does not match what the network expects."""
    pass


class BackwardError(NNError):
    """backward() called without a recorded forward pass."""
    pass


class SpecError(NNError):
    """NetworkSpec layers do not compose."""
    pass


class CheckpointMismatchError(NNError):
    """Checkpoint was written for a different network spec or parameter layout."""
    pass
