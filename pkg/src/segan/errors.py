"""Exception hierarchy shared across the package."""


class SeganError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(SeganError, ValueError):
    pass


class ConfigError(SeganError, ValueError):
    pass


class DivergenceError(SeganError, FloatingPointError):
    """A loss or gradient became non-finite during training."""


class ParseError(SeganError, ValueError):
    pass


class SchemaError(SeganError, ValueError):
    pass


class DatasetTooSmallError(SeganError, ValueError):
    pass


class EvaluationError(SeganError, RuntimeError):
    pass
