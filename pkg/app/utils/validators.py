import math
from typing import Sequence

import numpy as np

from app.utils.exceptions import ArgumentError


def finite_values(values: Sequence[float], name: str = "values") -> Sequence[float]:
    for index, value in enumerate(values):
        if not math.isfinite(value):
            raise ValueError(f"{name}[{index}] is not finite ({value}).")
    return values


def paired_arrays(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    """Coerce two sequences into float arrays of equal (non-zero) length."""
    a = np.asarray(actual, dtype=float)
    b = np.asarray(predicted, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise ArgumentError("expected one-dimensional sequences")
    if a.shape != b.shape:
        raise ArgumentError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ArgumentError("empty input")
    return a, b


def is_constant(values: np.ndarray) -> bool:
    return bool(np.ptp(values) == 0.0)
