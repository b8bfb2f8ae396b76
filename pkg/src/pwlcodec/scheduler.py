"""Whole-stream compression and decompression.

Support vectors of all dimensions share one stream without per-vector
dimension tags. Both sides track, in a priority queue ordered by ``(t, k)``,
the time at which each dimension's next segment starts; the compressor emits
finished segments strictly in that order, parking segments that were
discovered early in a second queue until their turn comes.
"""

from __future__ import annotations

import heapq
import io
import math
from collections import deque
from dataclasses import dataclass
from typing import BinaryIO, Callable, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from . import _kernels
from .codec import decode_stream, encode_stream, CodecError
from .container import (Block, Chunk, ContainerError, ContainerReader, FileHeader,
                        UNKNOWN_FRAMES, footer_bytes)
from .quantizer import (MAX_SCALE_BITS, ErrorBudget, InputError, RangeError, dyadic_floor,
                        quantize, quantize_array, unzigzag_array, zigzag_array)
from .codec import keyframe_width

KERNELS = {"divfree": _kernels.KERNEL_DIVFREE, "reference": _kernels.KERNEL_REFERENCE}
_PRODUCT_LIMIT = 2**62


class DecodeError(ContainerError):
    """The support-vector stream does not match the queue bookkeeping."""


@dataclass(frozen=True)
class BlockPlan:
    block_size: int = 2048
    chunk_len: int = 1024

    def __post_init__(self):
        if self.block_size < 2:
            raise ValueError("block_size must be at least 2")
        if self.chunk_len < 1:
            raise ValueError("chunk_len must be at least 1")


def choose_scale(eps_f_grid: float, q_span: int, block_size: int) -> Tuple[int, int]:
    """Pick ``(scale_bits, e)`` with ``e / 2**scale_bits <= eps_f_grid``.

    Uses the finest scale whose cross products stay below 2**62 for offsets up
    to ``q_span`` grid units and durations up to ``block_size``.
    """
    for bits in range(MAX_SCALE_BITS, -1, -1):
        frac = dyadic_floor(eps_f_grid, bits)
        e = frac.numerator * ((1 << bits) // frac.denominator)
        reach = q_span + math.ceil(frac) + 1
        if (reach * (1 << bits) + e) * (block_size + 1) < _PRODUCT_LIMIT:
            return bits, e
    raise RangeError("coordinate range too large for exact 64-bit segment arithmetic")


class SegmentScheduler:
    """Reorders finished segments from discovery order into storage order.

    ``expected`` holds one ``(t, k)`` per dimension: the start of the next
    segment to store for ``k``. ``known`` holds finished segments
    ``(t_start, k, delta_t, delta_q)`` that are not stored yet. Stored
    segments go to a double-ended buffer, ``delta_q`` to the front and
    ``delta_t`` to the back, handed to ``on_chunk`` every ``chunk_len``
    vectors.
    """

    def __init__(self, nd: int, chunk_len: int, on_chunk: Callable[[int, np.ndarray], None]):
        self.nd = nd
        self.chunk_len = chunk_len
        self.on_chunk = on_chunk
        self.expected: List[Tuple[int, int]] = []
        self.known: List[Tuple[int, int, int, int]] = []
        self.buf: deque = deque()
        self.peak_known = 0

    def start_block(self, t: int) -> None:
        self.expected = [(t, k) for k in range(self.nd)]

    def add(self, t_start: int, k: int, delta_t: int, delta_q: int) -> None:
        heapq.heappush(self.known, (t_start, k, delta_t, delta_q))
        if len(self.known) > self.peak_known:
            self.peak_known = len(self.known)

    def drain(self) -> int:
        known, expected, buf = self.known, self.expected, self.buf
        n = 0
        while known and known[0][0] == expected[0][0] and known[0][1] == expected[0][1]:
            t, k, dt, dq = heapq.heappop(known)
            heapq.heapreplace(expected, (t + dt, k))
            buf.appendleft(dq)
            buf.append(dt)
            n += 1
            if len(buf) >= 2 * self.chunk_len:
                self.flush_chunk()
        return n

    def flush_chunk(self) -> None:
        if not self.buf:
            return
        values = np.array(self.buf, dtype=np.int64)
        n = len(values) // 2
        values[:n] = zigzag_array(values[:n]).astype(np.int64)
        self.buf.clear()
        self.on_chunk(n, values.astype(np.uint64))

    def end_block(self) -> None:
        self.drain()
        if self.known:
            raise RuntimeError(f"{len(self.known)} segments left undrained at block end")
        self.flush_chunk()


class Compressor:
    """Streaming writer: feed frames with :meth:`write`, finish with :meth:`close`.

    ``lower``/``upper`` bound every coordinate per dimension; they fix the
    key-frame bit widths before any data is seen, and frames outside them
    are rejected. Output is append-only.
    """

    def __init__(self, out: BinaryIO, nd: int, budget: ErrorBudget, lower, upper,
                 plan: BlockPlan = BlockPlan(), kernel: str = "divfree",
                 n_frames: Optional[int] = None):
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}")
        self.out = out
        self.nd = nd
        self.budget = budget
        self.plan = plan
        self.kernel = KERNELS[kernel]
        lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (nd,))
        upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (nd,))
        if np.any(~np.isfinite(lower)) or np.any(~np.isfinite(upper)) or np.any(upper < lower):
            raise InputError("bounds must be finite with lower <= upper")
        eps_q = budget.eps_q
        self.q_lo = quantize_array(lower, eps_q)
        self.q_hi = quantize_array(upper, eps_q)
        span = self.q_hi - self.q_lo
        widths = [max(keyframe_width(float(u - l), eps_q), int(s).bit_length(), 1)
                  for l, u, s in zip(lower, upper, span)]
        if max(widths) > 64:
            raise RangeError("key-frame width exceeds 64 bits")
        self.header = FileHeader(nd, UNKNOWN_FRAMES if n_frames is None else n_frames,
                                 eps_q, budget.eps_f, plan.block_size, plan.chunk_len,
                                 lower, widths)
        self.scale_bits, self.e = choose_scale(budget.eps_f_grid, int(span.max()), plan.block_size)
        self.n_frames = n_frames
        self.state = _kernels.new_state(nd)
        self.sched = SegmentScheduler(nd, plan.chunk_len, self._on_chunk)
        self._rows = max(1, (1 << 16) // nd)
        self._out = np.zeros((max(self._rows * nd, nd), 4), dtype=np.int64)
        self._no_decisions = np.zeros((0, 0), dtype=np.uint8)
        self.t = 0
        self.block: Optional[Block] = None
        self.offsets: List[int] = []
        self.pos = 0
        self.n_vectors = 0
        self.closed = False

    @property
    def scale(self) -> int:
        return 1 << self.scale_bits

    def _emit(self, data: bytes) -> None:
        self.out.write(data)
        self.pos += len(data)

    def _on_chunk(self, n: int, values: np.ndarray) -> None:
        self.block.chunks.append(Chunk(n, encode_stream(values)))
        self.n_vectors += n

    def _push(self, n: int) -> None:
        add = self.sched.add
        for t, k, dt, dq in self._out[:n].tolist():
            add(t, k, dt, dq)

    def _start_block(self, qrow: np.ndarray) -> None:
        _kernels.reset(self.state, qrow)
        self.sched.start_block(self.t)
        self.block = Block(0, qrow.copy())
        self.block_start = self.t

    def _end_block(self) -> None:
        n = _kernels.flush_all(self.t, self.state, self.scale, self.e, self.kernel, self._out)
        self._push(n)
        self.sched.end_block()
        self.block.frame_count = self.t - self.block_start
        self.offsets.append(self.pos)
        self._emit(self.block.to_bytes(self.header))
        self.block = None

    def write(self, frames) -> None:
        if self.closed:
            raise ValueError("compressor is closed")
        x = np.asarray(frames, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.nd:
            raise InputError(f"expected frames with {self.nd} coordinates, got shape {x.shape}")
        if x.shape[0] == 0:
            return
        q = quantize_array(x, self.budget.eps_q)
        bad = (q < self.q_lo) | (q > self.q_hi)
        if bad.any():
            row, k = np.argwhere(bad)[0]
            raise InputError(f"frame {self.t + row}, dimension {k}: value {x[row, k]} "
                             f"outside the declared bounds")
        if self.t == 0:
            self._emit(self.header.to_bytes())
        B = self.plan.block_size
        i = 0
        while i < q.shape[0]:
            if self.t % B == 0:
                if self.t > 0:
                    self._end_block()
                self._start_block(q[i])
                i += 1
                self.t += 1
                continue
            m = min(q.shape[0] - i, B - self.t % B, self._rows)
            n = _kernels.step_frames(q[i:i + m], self.t, self.state, self.scale, self.e,
                                     self.kernel, self._out, self._no_decisions)
            self._push(n)
            self.sched.drain()
            i += m
            self.t += m

    def close(self) -> None:
        if self.closed:
            return
        if self.t == 0:
            raise InputError("no frames were written")
        if self.n_frames is not None and self.n_frames != self.t:
            raise InputError(f"declared {self.n_frames} frames but received {self.t}")
        self._end_block()
        self._emit(footer_bytes(self.offsets))
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()


def compress_stream(frames: Iterable, budget: ErrorBudget, plan: BlockPlan = BlockPlan(),
                    bounds=None, kernel: str = "divfree") -> bytes:
    """Compress an iterable of frames into container bytes.

    Without ``bounds`` the frames are materialised to find the exact bounding
    box first; with ``(lower, upper)`` they are streamed.
    """
    out = io.BytesIO()
    if bounds is None:
        x = np.asarray(list(frames) if not isinstance(frames, np.ndarray) else frames,
                       dtype=np.float64)
        if x.size == 0:
            raise InputError("no frames to compress")
        if x.ndim != 2:
            raise InputError("frames must all have the same number of coordinates")
        if not np.all(np.isfinite(x)):
            raise InputError("coordinates contain NaN or Inf")
        comp = Compressor(out, x.shape[1], budget, x.min(axis=0), x.max(axis=0), plan, kernel,
                          n_frames=x.shape[0])
        comp.write(x)
        comp.close()
        return out.getvalue()
    lower, upper = bounds
    comp = None
    for frame in frames:
        frame = np.asarray(frame, dtype=np.float64)
        if comp is None:
            comp = Compressor(out, frame.shape[-1], budget, lower, upper, plan, kernel)
        comp.write(frame)
    if comp is None:
        raise InputError("no frames to compress")
    comp.close()
    return out.getvalue()


def compress_array(x, eps: float, lam: float = 0.5, block_size: int = 2048,
                   chunk_len: int = 1024, kernel: str = "divfree") -> bytes:
    """Compress a ``(frames, nd)`` array with total error ``eps``."""
    return compress_stream(np.asarray(x, dtype=np.float64), ErrorBudget(eps, lam),
                           BlockPlan(block_size, chunk_len), kernel=kernel)


def block_vectors(block: Block) -> Tuple[np.ndarray, np.ndarray]:
    """``(delta_q, delta_t)`` of every support vector in storage order."""
    dqs, dts = [], []
    for chunk in block.chunks:
        try:
            values = decode_stream(chunk.payload, 2 * chunk.n)
        except CodecError as exc:
            raise DecodeError(str(exc)) from None
        n = chunk.n
        dqs.append(unzigzag_array(values[:n][::-1]))
        dts.append(values[n:].astype(np.int64))
    if not dqs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(dqs), np.concatenate(dts)


def assign_dimensions(delta_t: np.ndarray, nd: int, frame_count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Replay the expected-start queue to recover ``(t_start, k)`` per vector.

    Times are relative to the block's key frame.
    """
    last = frame_count - 1
    expected = [(0, k) for k in range(nd)]
    ts = np.empty(len(delta_t), dtype=np.int64)
    ks = np.empty(len(delta_t), dtype=np.int64)
    for i, d in enumerate(delta_t.tolist()):
        t, k = expected[0]
        if t >= last:
            raise DecodeError(f"{len(delta_t) - i} surplus support vectors")
        if d < 1 or t + d > last:
            raise DecodeError(f"support vector {i} (dimension {k}, duration {d}) overruns the block")
        heapq.heapreplace(expected, (t + d, k))
        ts[i] = t
        ks[i] = k
    if last > 0 and expected[0][0] < last:
        raise DecodeError(f"dimension {expected[0][1]} ends at frame {expected[0][0]} of {last}")
    return ts, ks


def decode_block_grid(block: Block, nd: int) -> np.ndarray:
    """Reconstruct a block in grid units, shape ``(frame_count, nd)``."""
    F = block.frame_count
    if F < 1:
        raise DecodeError("block with no frames")
    dq, dt = block_vectors(block)
    ts, ks = assign_dimensions(dt, nd, F)
    key = block.keyframe.astype(np.int64)
    out = np.empty((F, nd), dtype=np.float64)
    if F == 1:
        out[0] = key
        return out
    order = np.lexsort((ts, ks))
    ts, ks, dt, dq = ts[order], ks[order], dt[order], dq[order]
    csum = np.cumsum(dq)
    before = csum - dq
    first = np.searchsorted(ks, np.arange(nd))
    p_start = key[ks] + before - before[first][ks]
    idx = np.repeat(np.arange(len(dt)), dt)
    seg_base = np.repeat(np.cumsum(dt) - dt, dt)
    tau = np.arange(len(idx)) - seg_base
    out[ts[idx] + tau, ks[idx]] = p_start[idx] + tau * dq[idx] / dt[idx]
    totals = np.zeros(nd, dtype=np.int64)
    np.add.at(totals, ks, dq)
    out[F - 1] = key + totals
    return out


class Decompressor:
    """Reads a container; frames come back as float64 rows."""

    def __init__(self, f: BinaryIO):
        self.reader = ContainerReader(f)
        self.header = self.reader.header

    @classmethod
    def from_bytes(cls, data: bytes) -> "Decompressor":
        return cls(io.BytesIO(data))

    @property
    def n_frames(self) -> int:
        return self.reader.n_frames

    def block(self, i: int) -> np.ndarray:
        try:
            block = self.reader.read_block(i)
            grid = decode_block_grid(block, self.header.nd)
        except ContainerError as exc:
            raise type(exc)(f"block {i}: {exc}") from None
        return grid * (2.0 * self.header.eps_q)

    def blocks(self) -> Iterator[np.ndarray]:
        for i in range(self.reader.n_blocks):
            yield self.block(i)

    def __iter__(self) -> Iterator[np.ndarray]:
        for block in self.blocks():
            yield from block

    def read_all(self) -> np.ndarray:
        parts = list(self.blocks())
        if not parts:
            return np.zeros((0, self.header.nd))
        out = np.concatenate(parts)
        if self.header.frames_known and out.shape[0] != self.header.n_frames:
            raise DecodeError(f"header declares {self.header.n_frames} frames, blocks hold {out.shape[0]}")
        return out


def decompress_stream(data: bytes) -> Iterator[np.ndarray]:
    return iter(Decompressor.from_bytes(data))


def decompress_array(data: bytes) -> np.ndarray:
    return Decompressor.from_bytes(data).read_all()
