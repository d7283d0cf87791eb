"""Exception types raised across the package."""


class StructureError(ValueError):
    """Malformed network structure, instance or family key."""


class ParseError(ValueError):
    """A network or dataset file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ValueError):
    """Dataset contents do not match the variable table."""


class ZeroEvidenceError(ValueError):
    """Evidence has probability zero under the network."""


class EvaluationError(KeyError):
    """A family cannot be scored from the available statistics."""


class ConfigError(ValueError):
    """Invalid scoring or learner configuration."""
