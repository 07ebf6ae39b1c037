"""Exception types shared across the toolkit."""


class ModsenseError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(ModsenseError):
    """A config value is out of range or inconsistent."""


class ShapeError(ModsenseError):
    """Array dimensions do not match the declared contract."""


class DegenerateInputError(ModsenseError):
    """Input is mathematically degenerate (e.g. all-zero frame)."""


class TruncationError(ModsenseError):
    """A sample source ran out of data mid-operation."""
