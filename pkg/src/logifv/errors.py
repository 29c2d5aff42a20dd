"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its valid range or inconsistent with the model."""


class UnsupportedOperationError(TypeError):
    """The operation is not defined for this object (e.g. tail exponent of a
    finite-support law)."""


class SizeLimitError(ValueError):
    """The request exceeds a documented size limit (e.g. matrix-exponential
    block counts above 64)."""


class ExtinctError(RuntimeError):
    """A single-event step was requested from an extinct (absorbing) state."""


class ConfigError(ValueError):
    """A run configuration file is malformed, has unknown sections or keys,
    or is missing keys the requested command needs."""
