"""Exception types shared across the package."""


class CrowdGANError(Exception):
    """Base class for all crowdgan errors."""


class InputError(CrowdGANError, ValueError):
    """An operation received data violating its preconditions."""


class ConfigError(CrowdGANError, ValueError):
    """A configuration value is invalid or incompatible (bad key, range, or architecture mismatch)."""


class FormatError(CrowdGANError, ValueError):
    """A file on disk does not conform to its expected binary/text format."""
