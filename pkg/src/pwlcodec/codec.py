"""Group-partitioned unsigned integer codec and fixed-width bit packing.

Bitstream (LSB first, little-endian bytes, zero padded to a byte boundary):
a sequence of groups, each a 5-bit width code, a 6-bit ``count - 1`` and then
``count`` values of that width. Width codes 0..30 are literal, code 31 means
32 bits; values needing exactly 31 bits are stored at 32. Group boundaries
minimise the total bit count (dynamic programming over prefixes).
"""

from __future__ import annotations

import math
from typing import List, NamedTuple

import numba
import numpy as np

HEADER_BITS = 11
MAX_COUNT = 64
MAX_WIDTH = 32
WIDE_CODE = 31


class CodecError(ValueError):
    """Malformed or truncated bitstream, or a value that does not fit."""


class CodecGroup(NamedTuple):
    width: int
    count: int


def storage_width(bits: int) -> int:
    """Width a value of ``bits`` significant bits is stored at."""
    return MAX_WIDTH if bits == 31 else bits


def _bit_lengths(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.uint64)
    if v.size == 0:
        return np.zeros(0, dtype=np.int64)
    if v.max() >> np.uint64(32):
        raise CodecError("codec values must fit in 32 bits")
    # exact for values < 2**32: frexp exponent is the bit length
    widths = np.frexp(v.astype(np.float64))[1].astype(np.int64)
    widths[widths == 31] = MAX_WIDTH
    return widths


@numba.njit(cache=True)
def _partition_dp(widths):
    n = widths.shape[0]
    cost = np.zeros(n + 1, dtype=np.int64)
    back = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        best = -1
        best_c = 0
        w = 0
        for c in range(1, min(MAX_COUNT, i) + 1):
            if widths[i - c] > w:
                w = widths[i - c]
            total = cost[i - c] + HEADER_BITS + c * w
            if best < 0 or total < best:
                best = total
                best_c = c
        cost[i] = best
        back[i] = best_c
    return cost, back


def optimal_partition(values) -> List[CodecGroup]:
    """Split ``values`` into groups minimising ``sum(11 + count * width)``."""
    widths = _bit_lengths(values)
    n = widths.shape[0]
    if n == 0:
        return []
    _, back = _partition_dp(widths)
    groups = []
    i = n
    while i > 0:
        c = int(back[i])
        groups.append(CodecGroup(int(widths[i - c:i].max()), c))
        i -= c
    groups.reverse()
    return groups


def encoded_bits(groups) -> int:
    return sum(HEADER_BITS + g.count * g.width for g in groups)


@numba.njit(cache=True)
def _write_fields(values, widths, nbytes):
    out = np.zeros(nbytes, dtype=np.uint8)
    pos = 0
    for i in range(values.shape[0]):
        v = values[i]
        w = widths[i]
        while w > 0:
            byte = pos >> 3
            shift = pos & 7
            take = min(8 - shift, w)
            chunk = (v & np.uint64((1 << take) - 1)) << np.uint64(shift)
            out[byte] |= np.uint8(chunk)
            v = v >> np.uint64(take)
            w -= take
            pos += take
    return out


def pack_fields(values, widths) -> bytes:
    """Concatenate ``values[i]`` at ``widths[i]`` bits each, LSB first."""
    values = np.asarray(values, dtype=np.uint64)
    widths = np.asarray(widths, dtype=np.int64)
    nbits = int(widths.sum())
    return _write_fields(values, widths, (nbits + 7) // 8).tobytes()


def encode_stream(values) -> bytes:
    values = np.asarray(values, dtype=np.uint64)
    groups = optimal_partition(values)
    n_fields = 2 * len(groups) + len(values)
    field_vals = np.empty(n_fields, dtype=np.uint64)
    field_w = np.empty(n_fields, dtype=np.int64)
    i = j = 0
    for g in groups:
        field_vals[j] = WIDE_CODE if g.width == MAX_WIDTH else g.width
        field_w[j] = 5
        field_vals[j + 1] = g.count - 1
        field_w[j + 1] = 6
        field_vals[j + 2:j + 2 + g.count] = values[i:i + g.count]
        field_w[j + 2:j + 2 + g.count] = g.width
        j += 2 + g.count
        i += g.count
    return pack_fields(field_vals, field_w)


@numba.njit(cache=True)
def _read(buf, pos, w):
    v = np.uint64(0)
    got = 0
    while got < w:
        byte = pos >> 3
        shift = pos & 7
        take = min(8 - shift, w - got)
        bits = (np.uint64(buf[byte]) >> np.uint64(shift)) & np.uint64((1 << take) - 1)
        v |= bits << np.uint64(got)
        got += take
        pos += take
    return v


@numba.njit(cache=True)
def _decode(buf, n_values, out):
    """Returns 0 on success, 1 truncated, 2 overlong group, 3 bad padding."""
    total = buf.shape[0] * 8
    pos = 0
    i = 0
    while i < n_values:
        if pos + HEADER_BITS > total:
            return 1
        code = np.int64(_read(buf, pos, 5))
        count = np.int64(_read(buf, pos + 5, 6)) + 1
        pos += HEADER_BITS
        w = MAX_WIDTH if code == WIDE_CODE else code
        if i + count > n_values:
            return 2
        if pos + count * w > total:
            return 1
        for j in range(count):
            out[i + j] = _read(buf, pos, w)
            pos += w
        i += count
    if (pos + 7) // 8 != buf.shape[0]:
        return 3
    if pos < total and _read(buf, pos, total - pos) != 0:
        return 3
    return 0


_DECODE_ERRORS = {
    1: "truncated bitstream",
    2: "group runs past the declared value count",
    3: "trailing bytes or non-zero padding",
}


def decode_stream(data: bytes, n_values: int) -> np.ndarray:
    buf = np.frombuffer(data, dtype=np.uint8)
    out = np.zeros(n_values, dtype=np.uint64)
    status = _decode(buf, n_values, out)
    if status:
        raise CodecError(_DECODE_ERRORS[status])
    return out


def pack_fixed(values, width: int) -> bytes:
    """Pack unsigned ``values`` at ``width`` bits each (1..64)."""
    if not 1 <= width <= 64:
        raise CodecError(f"width {width} outside 1..64")
    values = np.asarray(values)
    if values.size and (values.min() < 0 or (width < 64 and int(values.max()) >> width)):
        raise CodecError(f"value does not fit in {width} bits")
    return pack_fields(values.astype(np.uint64), np.full(values.size, width, dtype=np.int64))


def pack_fixed_widths(values, widths) -> bytes:
    """Like :func:`pack_fixed` with one width per value."""
    values = np.asarray(values)
    widths = np.asarray(widths, dtype=np.int64)
    if values.size and values.min() < 0:
        raise CodecError("negative value")
    for v, w in zip(values.tolist(), widths.tolist()):
        if v >> w:
            raise CodecError(f"value {v} does not fit in {w} bits")
    return pack_fields(values.astype(np.uint64), widths)


@numba.njit(cache=True)
def _read_fields(buf, widths, out):
    pos = 0
    for i in range(widths.shape[0]):
        out[i] = _read(buf, pos, widths[i])
        pos += widths[i]


def unpack_fixed_widths(data: bytes, widths) -> np.ndarray:
    widths = np.asarray(widths, dtype=np.int64)
    if len(data) * 8 < int(widths.sum()):
        raise CodecError("truncated fixed-width field")
    out = np.zeros(widths.size, dtype=np.uint64)
    _read_fields(np.frombuffer(data, dtype=np.uint8), widths, out)
    return out


def unpack_fixed(data: bytes, width: int, n: int) -> np.ndarray:
    return unpack_fixed_widths(data, np.full(n, width, dtype=np.int64))


def keyframe_width(extent: float, eps_q: float) -> int:
    """Bits per key-frame coordinate for a bounding-box edge of ``extent``."""
    cells = extent / (2.0 * eps_q)
    if cells <= 1:
        return 1
    return max(1, math.ceil(math.log2(cells)))
