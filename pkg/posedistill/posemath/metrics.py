"""
Evaluation statistics over per-sample geodesic errors (degrees).

Acc30 is the fraction of errors strictly below 30°; MedErr is the median,
averaging the two central values for even-length inputs.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

ACC_THRESHOLD_DEG: float = 30.0


class EmptyEvaluationError(ValueError):
    """Raised when a metric is requested over an empty evaluation set."""


def _as_errors(errors_deg: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(errors_deg, dtype=np.float64)
    if arr.size == 0:
        raise EmptyEvaluationError("evaluation set is empty: no errors to aggregate")
    return arr


def acc30(errors_deg: Sequence[float] | np.ndarray) -> float:
    """Fraction of entries strictly less than 30 degrees."""
    arr = _as_errors(errors_deg)
    return float(np.count_nonzero(arr < ACC_THRESHOLD_DEG)) / arr.size


def mederr(errors_deg: Sequence[float] | np.ndarray) -> float:
    """Median error in degrees."""
    return float(np.median(_as_errors(errors_deg)))
