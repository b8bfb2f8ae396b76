"""Greedy piecewise-linear segmentation of one quantized dimension.

A segment starts at grid value ``p``. Every accepted sample ``q`` taken ``dt``
steps later admits the slopes ``[(q - p - eps) / dt, (q - p + eps) / dt]``;
the segment keeps the intersection of those cones and ends when the next
sample would empty it. On top of the cone test a sample is only accepted if
the endpoint interval ``[dt * v_lo, dt * v_hi]`` still contains an integer, so
every support vector lands on the data grid.

Two interchangeable kernels are provided:

* :class:`SegmentState` stores the slope bounds as exact fractions and follows
  the cone / intersection formulation literally.
* :class:`ExtremaState` stores the two extremal samples and decides with
  cross-multiplied integer comparisons, without dividing.

Both emit identical :class:`SupportVector` sequences. The compiled kernels in
``_kernels`` are the fast versions used by the stream compressor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Tuple

from .quantizer import RangeError

Cone = Tuple[Fraction, Fraction]

INT64_LIMIT = 2**63


class SupportVector(NamedTuple):
    delta_q: int
    delta_t: int


def cone_from_point(p: int, q: int, dt: int, eps) -> Cone:
    """Slopes through ``(0, p)`` that pass within ``eps`` of ``(dt, q)``."""
    if dt < 1:
        raise ValueError("dt must be at least 1")
    eps = Fraction(eps)
    return Fraction(q - p) / dt - eps / dt, Fraction(q - p) / dt + eps / dt


def cone_intersect(a: Cone, b: Cone) -> Optional[Cone]:
    """Intersection of two slope cones, ``None`` when empty."""
    lo = max(a[0], b[0])
    hi = min(a[1], b[1])
    if lo > hi:
        return None
    return lo, hi


def encodable(dt: int, cone: Cone) -> bool:
    """True when an integer endpoint exists in ``[dt * lo, dt * hi]``."""
    return math.ceil(dt * cone[0]) <= math.floor(dt * cone[1])


def clamp_endpoint(last: int, lo: int, hi: int) -> int:
    return min(max(last, lo), hi)


def reconstruct(p: int, sv: SupportVector, t: int, eps_q: float) -> float:
    """Coordinate value ``t`` steps into the segment starting at grid value ``p``."""
    if not 0 <= t <= sv.delta_t:
        raise ValueError(f"t={t} outside segment of length {sv.delta_t}")
    return (p + t * sv.delta_q / sv.delta_t) * (2.0 * eps_q)


@dataclass
class SegmentState:
    """Open segment with exact fractional slope bounds.

    ``dt == 0`` means the segment holds only its start point and the cone is
    unbounded.
    """

    p: int
    eps: Fraction
    dt: int = 0
    v_lo: Optional[Fraction] = None
    v_hi: Optional[Fraction] = None
    v_last: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        self.eps = Fraction(self.eps)

    @property
    def cone(self) -> Optional[Cone]:
        if self.dt == 0:
            return None
        return self.v_lo, self.v_hi

    def try_add(self, q: int) -> bool:
        """Extend the segment by ``q``; on failure leave the state untouched."""
        dt = self.dt + 1
        cand = cone_from_point(self.p, q, dt, self.eps)
        if self.dt > 0:
            cand = cone_intersect(self.cone, cand)
            if cand is None or not encodable(dt, cand):
                return False
        self.v_lo, self.v_hi = cand
        self.v_last = Fraction(q - self.p, dt)
        self.dt = dt
        return True

    def endpoint(self) -> int:
        if self.dt < 1:
            raise ValueError("cannot flush an empty segment")
        lo = math.ceil(self.dt * self.v_lo)
        hi = math.floor(self.dt * self.v_hi)
        return clamp_endpoint(int(self.dt * self.v_last), lo, hi)

    def flush(self, q: Optional[int] = None) -> SupportVector:
        """Close the segment; ``q`` is the sample that could not be added.

        The next segment starts at the emitted terminal and, when ``q`` is
        given, already contains it.
        """
        sv = SupportVector(self.endpoint(), self.dt)
        self.p += sv.delta_q
        self.dt = 0
        self.v_lo = self.v_hi = None
        self.v_last = Fraction(0)
        if q is not None:
            self.try_add(q)
        return sv


@dataclass
class ExtremaState:
    """Open segment stored as its two binding samples, integer arithmetic only.

    ``eps`` must be ``e / 2**scale_bits`` exactly; sample offsets are held
    multiplied by ``2**scale_bits``. Slope bounds are
    ``(y_lo - e) / (scale * t_lo)`` and ``(y_hi + e) / (scale * t_hi)``.
    """

    p: int
    eps: Fraction
    scale_bits: int
    dt: int = 0
    t_lo: int = 0
    y_lo: int = 0
    t_hi: int = 0
    y_hi: int = 0
    last: int = 0

    def __post_init__(self):
        self.scale = 1 << self.scale_bits
        e = Fraction(self.eps) * self.scale
        if e.denominator != 1:
            raise ValueError(f"eps {self.eps} is not a multiple of 2**-{self.scale_bits}")
        self.e = int(e)

    def _mul(self, a: int, b: int) -> int:
        r = a * b
        if abs(r) >= INT64_LIMIT:
            raise RangeError(f"cross product {a} * {b} exceeds 64 bits")
        return r

    def try_add(self, q: int) -> bool:
        d = q - self.p
        y = d * self.scale
        dt = self.dt + 1
        if self.dt == 0:
            self.t_lo = self.t_hi = 1
            self.y_lo = self.y_hi = y
            self.dt, self.last = 1, d
            return True
        e, m = self.e, self._mul
        empty = (m(self.y_lo - e, dt) > m(y + e, self.t_lo)
                 or m(y - e, self.t_hi) > m(self.y_hi + e, dt))
        new_lo = m(y - e, self.t_lo) > m(self.y_lo - e, dt)
        new_hi = m(y + e, self.t_hi) < m(self.y_hi + e, dt)
        t_lo, y_lo = (dt, y) if new_lo else (self.t_lo, self.y_lo)
        t_hi, y_hi = (dt, y) if new_hi else (self.t_hi, self.y_hi)
        lo = -(-m(dt, y_lo - e) // (self.scale * t_lo))
        hi = m(dt, y_hi + e) // (self.scale * t_hi)
        if empty or lo > hi:
            return False
        self.t_lo, self.y_lo, self.t_hi, self.y_hi = t_lo, y_lo, t_hi, y_hi
        self.dt, self.last = dt, d
        return True

    @property
    def cone(self) -> Optional[Cone]:
        if self.dt == 0:
            return None
        return (Fraction(self.y_lo - self.e, self.scale * self.t_lo),
                Fraction(self.y_hi + self.e, self.scale * self.t_hi))

    def endpoint(self) -> int:
        if self.dt < 1:
            raise ValueError("cannot flush an empty segment")
        lo = -(-self.dt * (self.y_lo - self.e) // (self.scale * self.t_lo))
        hi = self.dt * (self.y_hi + self.e) // (self.scale * self.t_hi)
        return clamp_endpoint(self.last, lo, hi)

    def flush(self, q: Optional[int] = None) -> SupportVector:
        sv = SupportVector(self.endpoint(), self.dt)
        self.p += sv.delta_q
        self.dt = 0
        self.last = 0
        if q is not None:
            self.try_add(q)
        return sv


def segment_series(q, eps, kernel: str = "reference", scale_bits: int = 20):
    """Segment one quantized series; ``q[0]`` is the start point.

    Returns the support vectors covering ``q[0] .. q[-1]``.
    """
    q = [int(v) for v in q]
    if kernel == "reference":
        state = SegmentState(q[0], eps)
    elif kernel == "divfree":
        state = ExtremaState(q[0], eps, scale_bits)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    out = []
    for value in q[1:]:
        if not state.try_add(value):
            out.append(state.flush(value))
    if state.dt:
        out.append(state.flush())
    return out
