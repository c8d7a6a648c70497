"""Exception hierarchy shared by all vitprune modules."""


class VitPruneError(Exception):
    """Base class for every error raised by this package."""


class InputError(VitPruneError, ValueError):
    """An operand violates a precondition (shape, range, emptiness)."""


class ConfigError(VitPruneError, ValueError):
    """A configuration value is rejected (keep rate, counts, layer indices)."""


class FormatError(VitPruneError):
    """A serialized container is malformed (magic, truncation, bad payload)."""


class MissingTensorError(VitPruneError, KeyError):
    """A named tensor required for the model is absent from a weight store."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"missing tensor: {self.name}"


class ShapeError(VitPruneError, ValueError):
    """A stored tensor's shape disagrees with the model geometry."""
