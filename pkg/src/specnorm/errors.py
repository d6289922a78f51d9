"""Error taxonomy shared across the package.

Three families, matching the process exit codes of the command line front
end: configuration problems (bad keys, ranges, incompatible settings),
data problems (malformed input files, unusable samples), and numerical
problems (failed decompositions, degenerate statistics). All derive from
:class:`SpecnormError` so callers can catch package errors in one clause.
"""

__all__ = ["SpecnormError", "ConfigError", "DataError", "NumericalError"]


class SpecnormError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SpecnormError, ValueError):
    """A configuration value is missing, unknown, or out of range."""


class DataError(SpecnormError, ValueError):
    """Input data cannot be used (malformed file, too short, non-finite)."""


class NumericalError(SpecnormError, RuntimeError):
    """A numerical routine failed or produced a degenerate quantity."""
