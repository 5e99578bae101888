class ConfigError(ValueError):
    """Invalid case configuration or lattice parameters."""


class NumericalError(RuntimeError):
    """The run produced a non-physical state (NaN, non-positive density)."""

    def __init__(self, message, step=None, node=None):
        super().__init__(message)
        self.step = step
        self.node = node


class PositivityError(NumericalError):
    pass
