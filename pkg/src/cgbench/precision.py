"""Working precision and the thresholds derived from machine epsilon."""

from __future__ import annotations

import enum
import math

import numpy as np


class PrecisionMode(str, enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self) -> type[np.floating]:
        return np.float32 if self is PrecisionMode.SINGLE else np.float64

    @classmethod
    def parse(cls, value: str | PrecisionMode) -> PrecisionMode:
        if isinstance(value, PrecisionMode):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown precision {value!r}; expected 'single' or 'double'") from None


_GRADIENT_THRESHOLDS = {PrecisionMode.SINGLE: 1e-7, PrecisionMode.DOUBLE: 1e-14}


def machine_epsilon(mode: PrecisionMode) -> float:
    """Spacing between 1 and the next representable number in ``mode``."""
    return float(np.finfo(mode.dtype).eps)


def tolerance_floor(mode: PrecisionMode) -> float:
    """Smallest useful relative line-search tolerance, ``sqrt(eps)``."""
    return math.sqrt(machine_epsilon(mode))


def effective_tolerance(tol: float, mode: PrecisionMode) -> float:
    return max(float(tol), tolerance_floor(mode))


def default_gradient_threshold(mode: PrecisionMode) -> float:
    return _GRADIENT_THRESHOLDS[mode]


def demote(value, mode: PrecisionMode):
    """Round a double scalar or array to the width of ``mode``.

    Round-to-nearest-even (numpy's cast). Raises ``OverflowError`` if a finite
    input does not fit in the target width.
    """
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("demote expects finite input")
    if mode is PrecisionMode.DOUBLE:
        out = arr.copy()
    else:
        with np.errstate(over="ignore"):
            out = arr.astype(np.float32)
        if not np.all(np.isfinite(out)):
            raise OverflowError("value overflows single precision")
    if np.ndim(value) == 0:
        return out.dtype.type(out)
    return out
