"""Exception types shared across the package."""


class TensorFMError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(TensorFMError):
    """Invalid field schema or schema mismatch between components."""


class DataError(TensorFMError):
    """Unreadable, malformed, or otherwise unusable input data."""


class ConfigError(TensorFMError):
    """Inconsistent model or training configuration."""


class ModelIOError(TensorFMError):
    """Corrupt, truncated, or incompatible model file."""


class NumericError(TensorFMError):
    """Non-finite values encountered during training or scoring."""


class MetricError(TensorFMError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
