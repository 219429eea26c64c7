"""Exception types shared across the package."""

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a regularized autocorrelation matrix cannot be factorized.

    Usually means the regularization parameter is too small for the data.
    """


class NumericError(FloatingPointError):
    """Raised when a solver receives NaN or infinite input."""


class IqFormatError(ValueError):
    """Raised for malformed raw I-Q or snapshot files."""
