"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid run configuration or flags (CLI exit code 2)."""


class ProtocolError(RuntimeError):
    """A runtime contract was violated (CLI exit code 3)."""
