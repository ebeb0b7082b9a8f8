"""Exception types shared across the package."""


class RealsampError(ValueError):
    """Base class for all errors raised by this package."""


class InvalidDistributionError(RealsampError):
    """A probability vector violates non-negativity / normalization."""


class ParameterError(RealsampError):
    """A scalar hyperparameter is outside its allowed range."""


class ShapeError(RealsampError):
    """Mismatched vector lengths or misaligned data."""


class DataError(RealsampError):
    """Non-finite or otherwise unusable numeric data."""


class FormatError(RealsampError):
    """A record file violates the on-disk schema."""


class SeparabilityError(RealsampError):
    """A factual/hallucination split does not satisfy the separability condition."""


class ConfigurationError(RealsampError):
    """A decode step is missing an input required by the chosen method."""


class MetricError(RealsampError):
    """A corpus metric is undefined for the given input."""
