class ParseError(ValueError):
    """Malformed input file; carries the 1-based row number when known."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class StateError(RuntimeError):
    """Operation invoked without its required prior state (e.g. missing trace)."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""
