"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A model, mask or run configuration is inconsistent (shape/dimension/schema)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)
        self.layer = layer


class DataError(ValueError):
    """A dataset or data file violates its contract."""
