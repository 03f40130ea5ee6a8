"""Exception types raised by the simulator."""

import numpy as np


class DegenerateChannelError(np.linalg.LinAlgError):
    """A channel draw is (numerically) rank deficient.

    Probability-zero under the i.i.d. tap model; the trial engine resamples.
    """


class SingularSystemError(np.linalg.LinAlgError):
    """Unregularized inversion of a numerically singular Gram matrix."""


class InsufficientDimensionsError(ValueError):
    """Fewer transmit than receive dimensions for channel inversion."""


class DegeneratePrecoderError(ValueError):
    """Cascaded precoder with zero power, cannot be normalized."""


class ConfigError(ValueError):
    """Invalid scenario configuration."""


class NumericalHardError(RuntimeError):
    """A trial kept hitting degenerate draws past the resample cap."""
