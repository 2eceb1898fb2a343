"""Trainer exception types."""


class TrainerError(Exception):
    """Base class for trainer failures."""


class DataError(TrainerError):
    """The image directory is empty, unreadable, or yields no valid pairs."""


class DivergenceDetected(TrainerError):
    """A non-finite training loss was observed."""
