"""Monte Carlo simulator for cascaded null-space / regularized-inverse
precoding of a small-cell tier underlaid on an OFDMA macro cell."""

from . import channel, matrix_core, metrics, precoder
from .exceptions import (
    ConfigError,
    DegenerateChannelError,
    DegeneratePrecoderError,
    InsufficientDimensionsError,
    NumericalHardError,
    SingularSystemError,
)
from .precoder import MUVFDMPrecoder

__version__ = "0.1.0"

__all__ = [
    "channel",
    "matrix_core",
    "metrics",
    "precoder",
    "MUVFDMPrecoder",
    "ConfigError",
    "DegenerateChannelError",
    "DegeneratePrecoderError",
    "InsufficientDimensionsError",
    "NumericalHardError",
    "SingularSystemError",
]
