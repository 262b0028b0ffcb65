"""Exception hierarchy shared across the package."""


class PathgradError(Exception):
    """Base class for all errors raised by pathgrad."""


class EmbeddingParseError(PathgradError, ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DuplicateTokenError(PathgradError, ValueError):
    pass


class ConfigurationError(PathgradError):
    pass


class ContractError(PathgradError, ValueError):
    """A caller violated a shape or precondition contract."""


class NumericError(PathgradError, FloatingPointError):
    pass


class SelectionError(PathgradError):
    pass


class TrainingError(PathgradError):
    pass
