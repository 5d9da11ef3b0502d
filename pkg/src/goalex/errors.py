"""Exception types shared across the package.

The CLI maps these onto exit codes (config 2, numeric 3, I/O 4); the HTTP
service maps them onto response codes with the same error_code payload.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class NumericError(RuntimeError):
    """Non-finite values or numerical breakdown during computation."""


class StateError(RuntimeError):
    """Operation called on an object in the wrong state (e.g. empty database)."""
