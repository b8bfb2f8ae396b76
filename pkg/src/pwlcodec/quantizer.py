"""Grid quantization, error-budget bookkeeping and the signed/unsigned mapping.

One grid unit is ``2 * eps_q`` coordinate units, so rounding to the nearest
grid point costs at most ``eps_q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MAX_GRID = 2**52
ZIGZAG_LIMIT = 2**62
# eps_f in grid units is held as e / 2**k with k at most this
MAX_SCALE_BITS = 20


class RangeError(ValueError):
    """A value falls outside the exactly representable integer range."""


class InputError(ValueError):
    """Non-finite or otherwise malformed coordinate data."""


@dataclass(frozen=True)
class ErrorBudget:
    """Total error ``eps_total`` split into quantization and approximation parts.

    ``lam`` is the share spent on quantization: ``eps_q = lam * eps_total``,
    ``eps_f = (1 - lam) * eps_total``.
    """

    eps_total: float
    lam: float = 0.5

    def __post_init__(self):
        if not math.isfinite(self.eps_total) or self.eps_total <= 0:
            raise ValueError(f"eps_total must be a positive finite number, got {self.eps_total}")
        if not (0 < self.lam <= 1):
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")

    @property
    def eps_q(self) -> float:
        return self.lam * self.eps_total

    @property
    def eps_f(self) -> float:
        return self.eps_total - self.eps_q

    @property
    def grid(self) -> float:
        return 2.0 * self.eps_q

    @property
    def eps_f_grid(self) -> float:
        return self.eps_f / self.grid

    def dyadic_eps_f(self, scale_bits: int = MAX_SCALE_BITS) -> Fraction:
        """``eps_f_grid`` rounded down to a multiple of ``2**-scale_bits``."""
        return dyadic_floor(self.eps_f_grid, scale_bits)


def dyadic_floor(value: float, scale_bits: int) -> Fraction:
    if value < 0 or not math.isfinite(value):
        raise ValueError(f"expected a finite non-negative value, got {value}")
    scale = 1 << scale_bits
    return Fraction(math.floor(value * scale), scale)


def quantize(x: float, eps_q: float) -> int:
    """Round ``x`` half-up onto the grid of step ``2 * eps_q``.

    >>> quantize(1.0, 0.25)
    2
    >>> quantize(-0.3, 0.25)
    -1
    """
    if not math.isfinite(x):
        raise InputError(f"cannot quantize non-finite value {x!r}")
    scaled = x / (2.0 * eps_q) + 0.5
    if abs(scaled) > MAX_GRID:
        raise RangeError(f"{x} / {2 * eps_q} exceeds the integer grid range")
    return math.floor(scaled)


def dequantize(q: int, eps_q: float) -> float:
    return q * (2.0 * eps_q)


def quantize_array(x, eps_q: float) -> np.ndarray:
    """Vectorised :func:`quantize`; returns int64."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InputError("coordinates contain NaN or Inf")
    scaled = x / (2.0 * eps_q) + 0.5
    if scaled.size and np.max(np.abs(scaled)) > MAX_GRID:
        raise RangeError("coordinates exceed the integer grid range")
    return np.floor(scaled).astype(np.int64)


def dequantize_array(q, eps_q: float) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) * (2.0 * eps_q)


def zigzag(i: int) -> int:
    if not -ZIGZAG_LIMIT < i < ZIGZAG_LIMIT:
        raise RangeError(f"{i} outside the zigzag range")
    return 2 * i if i >= 0 else -2 * i + 1


def unzigzag(u: int) -> int:
    if u < 0:
        raise RangeError(f"{u} is not an unsigned value")
    return u >> 1 if u & 1 == 0 else -((u - 1) >> 1)


def zigzag_array(i) -> np.ndarray:
    i = np.asarray(i, dtype=np.int64)
    if i.size and np.max(np.abs(i)) >= ZIGZAG_LIMIT:
        raise RangeError("value outside the zigzag range")
    return np.where(i >= 0, 2 * i, -2 * i + 1).astype(np.uint64)


def unzigzag_array(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.uint64)
    half = (u >> np.uint64(1)).astype(np.int64)
    return np.where((u & np.uint64(1)) == 0, half, -half)
