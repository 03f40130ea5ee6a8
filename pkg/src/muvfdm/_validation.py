import numbers

import numpy as np


def check_matrix(A, name="matrix", shape=None, allow_empty=False):
    """Return `A` as a 2-D complex ndarray, checking dimensions.

    ``shape`` may contain ``None`` for free axes.
    """
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not allow_empty and A.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    if shape is not None:
        for axis, (got, want) in enumerate(zip(A.shape, shape)):
            if want is not None and got != want:
                raise ValueError(
                    f"{name} has shape {A.shape}, expected {tuple(shape)} "
                    f"(axis {axis})")
    return A.astype(complex, copy=False)


def check_conformable(A, B, names=("A", "B")):
    if A.shape[1] != B.shape[0]:
        raise ValueError(
            f"{names[0]} {A.shape} and {names[1]} {B.shape} are not "
            f"conformable")


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value
