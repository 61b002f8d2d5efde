"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad capacity, unknown policy id, malformed spec file."""


class TraceFormatError(ValueError):
    """A trace file failed to parse; the message names the offending line."""


class DimensionError(ValueError):
    """An array's shape does not match a layer's spec; the message names the layer."""
