"""Central finite-difference gradient checking."""

from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from patientcode.errors import DataError

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-6


def grad_check(fn: Callable[[np.ndarray], Tuple[float, np.ndarray]], point: np.ndarray,
               step: float = DEFAULT_STEP, coordinates: Optional[Iterable[int]] = None,
               floor: float = DEFAULT_FLOOR) -> float:
    """Compare an analytic gradient against central differences.

    Args:
        fn: Maps a point to (value, analytic gradient shaped like the point).
        point: Where to check; not modified.
        step: Finite-difference step.
        coordinates: Flat indices to check; all coordinates when omitted.
        floor: Lower bound of the relative-error denominator.

    Returns:
        Worst |analytic - numeric| / max(|numeric|, floor) over the checked coordinates.

    Raises:
        DataError: fn returned a non-finite value.
    """
    x = np.array(point, dtype=np.float64)
    value, analytic = fn(x.copy())
    if not np.isfinite(value):
        raise DataError(f"function is not finite at the check point: {value}")
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    flat = x.reshape(-1)
    indices = range(flat.size) if coordinates is None else coordinates

    worst = 0.0
    for i in indices:
        original = flat[i]
        flat[i] = original + step
        f_plus, _ = fn(x.copy())
        flat[i] = original - step
        f_minus, _ = fn(x.copy())
        flat[i] = original
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise DataError(f"function is not finite near coordinate {i}")
        numeric = (f_plus - f_minus) / (2.0 * step)
        error = abs(analytic[i] - numeric) / max(abs(numeric), floor)
        worst = max(worst, error)
    return worst
