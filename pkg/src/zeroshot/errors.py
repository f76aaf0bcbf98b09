"""Exception types shared across the library."""


class ZeroShotError(Exception):
    """Base class for all library-specific errors."""


class DataError(ZeroShotError):
    """Raised when a dataset, split, or matrix file fails validation."""


class FeaturizationError(ZeroShotError):
    """Raised when a document cannot be turned into a feature vector."""


class OptimizationError(ZeroShotError):
    """Raised when an optimizer is handed an unusable problem."""


class RegressionError(ZeroShotError):
    """Raised when a regression model cannot be fit or evaluated."""


class PredictorError(ZeroShotError):
    """Raised when a classifier prediction problem has no usable solution."""
