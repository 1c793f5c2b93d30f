"""Exception types shared across the package."""


class UsageError(ValueError):
    """Raised when a caller violates an operation's precondition."""


class FormatError(ValueError):
    """Raised when a file does not parse as the expected binary format."""
