"""Exception types raised across the package."""

import numpy as np


class SpectraOverlap(np.linalg.LinAlgError):
    """The two coefficient matrices of a Sylvester equation share an eigenvalue."""


class SingularSystem(np.linalg.LinAlgError):
    """A dense linear system is numerically rank deficient."""


class NotHurwitz(ValueError):
    pass


class NotSymmetric(ValueError):
    pass


class SingularFo(np.linalg.LinAlgError):
    """The internal-model matrix ``F + g psi1^T`` is not invertible.

    For the known-generator construction this means the exosystem matrix has a zero eigenvalue.
    """


class NumericalBlowup(RuntimeError):
    """A simulated state left the admissible range.

    The partially recorded trace is attached as ``trace``.
    """

    def __init__(self, message, trace=None, time=None):
        super().__init__(message)
        self.trace = trace
        self.time = time


class DegenerateTrace(ValueError):
    pass


class WindowTooShort(ValueError):
    pass


class ConfigInvalid(ValueError):
    pass


class MismatchedPlants(ValueError):
    pass


class NotFound(LookupError):
    pass


class NonFinite(FloatingPointError):
    """A model function returned NaN or infinity."""
