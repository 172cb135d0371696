"""
Exception hierarchy for the synthetic environments.
"""


class EnvError(Exception):
    """Base exception for environment configuration and stepping."""
    pass


class UnknownVariantError(EnvError, KeyError):
    """Dynamics variant label outside A..H."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown variant"


class EnvNotResetError(EnvError):
    """step() before reset() or after the episode ended."""
    pass


class ActionShapeError(EnvError):
    """Action dimension does not match the task."""
    pass


class HeldOutDistractorError(EnvError):
    """A test distractor id reached a training code path."""
    pass
