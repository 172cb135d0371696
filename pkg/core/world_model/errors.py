"""
Exception hierarchy for the latent world model.
"""


class WorldModelError(Exception):
    """Base exception for world model operations."""
    pass


class SequenceTooShortError(WorldModelError):
    """observe() needs at least two timesteps."""
    pass
