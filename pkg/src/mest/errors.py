class DimensionError(ValueError):
    """Raised when an array does not have the dimensions an operation expects."""

    def __init__(self, name, expected, actual):
        self.name = name
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{name}: expected shape {self.expected}, got {self.actual}")


class ConfigError(ValueError):
    """Invalid experiment or CLI configuration."""
