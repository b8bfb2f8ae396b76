"""Seekable on-disk layout and the raw trajectory format.

All scalars are little-endian. File layout::

    header   "HRTC" u8 version, u32 nd, u64 frames, f64 eps_q, f64 eps_f,
             u32 block_size, u32 chunk_len, f64 origin[nd], u8 width[nd],
             u32 crc32
    block*   "HBLK" u32 frame_count, u32 n_chunks, key frame bits, u32 crc32
             then per chunk: u32 byte_len, u32 n, u32 crc32, payload
    footer   "HFTR" u64 offset[n_blocks], u64 n_blocks, u32 crc32, "HEND"

The key frame stores ``q - quantize(origin)`` for every dimension at that
dimension's width. A chunk payload is the integer-codec encoding of ``2n``
values. ``frames`` is ``2**64 - 1`` when the writer did not know the length
up front; readers then sum the block frame counts.
"""

from __future__ import annotations

import io
import json
import os
import struct
import warnings
import zlib
from dataclasses import dataclass, field
from typing import BinaryIO, List, Optional, Tuple

import numpy as np

from .codec import CodecError, pack_fixed_widths, unpack_fixed_widths
from .quantizer import quantize

MAGIC = b"HRTC"
VERSION = 1
BLOCK_MAGIC = b"HBLK"
FOOTER_MAGIC = b"HFTR"
END_MAGIC = b"HEND"
UNKNOWN_FRAMES = 2**64 - 1

_HEAD = struct.Struct("<4sBIQddII")
_BLOCK_HEAD = struct.Struct("<4sII")
_CHUNK_HEAD = struct.Struct("<III")
_TRAILER = struct.Struct("<QI4s")
_U32 = struct.Struct("<I")


class ContainerError(ValueError):
    """Corrupt, truncated or incompatible container data."""


def _crc(*parts: bytes) -> int:
    c = 0
    for part in parts:
        c = zlib.crc32(part, c)
    return c


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ContainerError(f"truncated {what}: wanted {n} bytes, got {len(data)}")
    return data


@dataclass
class FileHeader:
    nd: int
    n_frames: int
    eps_q: float
    eps_f: float
    block_size: int
    chunk_len: int
    origins: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        self.origins = np.asarray(self.origins, dtype=np.float64).reshape(self.nd)
        self.widths = np.asarray(self.widths, dtype=np.uint8).reshape(self.nd)

    @property
    def q_origins(self) -> np.ndarray:
        return np.array([quantize(o, self.eps_q) for o in self.origins], dtype=np.int64)

    @property
    def keyframe_bytes(self) -> int:
        return (int(self.widths.astype(np.int64).sum()) + 7) // 8

    @property
    def frames_known(self) -> bool:
        return self.n_frames != UNKNOWN_FRAMES

    def to_bytes(self) -> bytes:
        body = (_HEAD.pack(MAGIC, VERSION, self.nd, self.n_frames, self.eps_q, self.eps_f,
                           self.block_size, self.chunk_len)
                + self.origins.astype("<f8").tobytes() + self.widths.tobytes())
        return body + _U32.pack(_crc(body))

    @classmethod
    def read(cls, f: BinaryIO) -> "FileHeader":
        head = _read_exact(f, _HEAD.size, "header")
        magic, version, nd, n_frames, eps_q, eps_f, block_size, chunk_len = _HEAD.unpack(head)
        if magic != MAGIC:
            raise ContainerError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ContainerError(f"unsupported container version {version}")
        rest = _read_exact(f, 9 * nd + 4, "header")
        (crc,) = _U32.unpack(rest[-4:])
        if crc != _crc(head, rest[:-4]):
            raise ContainerError("header checksum mismatch")
        origins = np.frombuffer(rest[:8 * nd], dtype="<f8")
        widths = np.frombuffer(rest[8 * nd:9 * nd], dtype=np.uint8)
        return cls(nd, n_frames, eps_q, eps_f, block_size, chunk_len, origins.copy(), widths.copy())

    @property
    def size(self) -> int:
        return _HEAD.size + 9 * self.nd + 4


@dataclass
class Chunk:
    n: int
    payload: bytes

    def to_bytes(self) -> bytes:
        head = struct.pack("<II", len(self.payload), self.n)
        return head + _U32.pack(_crc(head, self.payload)) + self.payload


@dataclass
class Block:
    frame_count: int
    keyframe: np.ndarray
    chunks: List[Chunk] = field(default_factory=list)

    def to_bytes(self, header: FileHeader) -> bytes:
        offsets = np.asarray(self.keyframe, dtype=np.int64) - header.q_origins
        try:
            kf = pack_fixed_widths(offsets, header.widths)
        except CodecError as exc:
            raise ContainerError(f"key frame outside the declared bounds: {exc}") from None
        head = _BLOCK_HEAD.pack(BLOCK_MAGIC, self.frame_count, len(self.chunks)) + kf
        parts = [head, _U32.pack(_crc(head))]
        parts.extend(c.to_bytes() for c in self.chunks)
        return b"".join(parts)


def read_block(f: BinaryIO, header: FileHeader, index: int = -1) -> Block:
    where = f"block {index}" if index >= 0 else "block"
    head = _read_exact(f, _BLOCK_HEAD.size, where)
    magic, frame_count, n_chunks = _BLOCK_HEAD.unpack(head)
    if magic != BLOCK_MAGIC:
        raise ContainerError(f"{where}: bad block magic {magic!r}")
    kf = _read_exact(f, header.keyframe_bytes, where)
    (crc,) = _U32.unpack(_read_exact(f, 4, where))
    if crc != _crc(head, kf):
        raise ContainerError(f"{where}: key frame checksum mismatch")
    keyframe = unpack_fixed_widths(kf, header.widths).astype(np.int64) + header.q_origins
    chunks = []
    for _ in range(n_chunks):
        ch = _read_exact(f, _CHUNK_HEAD.size, where)
        byte_len, n, crc = _CHUNK_HEAD.unpack(ch)
        payload = _read_exact(f, byte_len, where)
        if crc != _crc(ch[:8], payload):
            raise ContainerError(f"{where}: chunk checksum mismatch")
        chunks.append(Chunk(n, payload))
    return Block(frame_count, keyframe, chunks)


def footer_bytes(offsets) -> bytes:
    body = FOOTER_MAGIC + np.asarray(offsets, dtype="<u8").tobytes()
    tail = struct.pack("<Q", len(offsets))
    return body + tail + _U32.pack(_crc(body, tail)) + END_MAGIC


def read_footer(f: BinaryIO, file_size: int, data_start: int) -> List[int]:
    if file_size - data_start < _TRAILER.size + 4:
        raise ContainerError("no room for a footer")
    f.seek(file_size - _TRAILER.size)
    n_blocks, crc, end = _TRAILER.unpack(_read_exact(f, _TRAILER.size, "footer"))
    if end != END_MAGIC:
        raise ContainerError("missing footer end marker")
    start = file_size - _TRAILER.size - 8 * n_blocks - 4
    if start < data_start:
        raise ContainerError("footer block count out of range")
    f.seek(start)
    body = _read_exact(f, 4 + 8 * n_blocks, "footer")
    if body[:4] != FOOTER_MAGIC:
        raise ContainerError("bad footer magic")
    if crc != _crc(body, struct.pack("<Q", n_blocks)):
        raise ContainerError("footer checksum mismatch")
    offsets = np.frombuffer(body[4:], dtype="<u8").astype(np.int64).tolist()
    if any(b <= a for a, b in zip(offsets, offsets[1:])) or (offsets and (
            offsets[0] < data_start or offsets[-1] >= start)):
        raise ContainerError("footer offsets out of range")
    return offsets


class ContainerReader:
    """Random access to the blocks of a finished container.

    ``f`` must be seekable. Only the header and footer are read on open; a
    damaged footer triggers a sequential scan of the block headers instead.
    """

    def __init__(self, f: BinaryIO):
        self.f = f
        f.seek(0)
        self.header = FileHeader.read(f)
        f.seek(0, os.SEEK_END)
        self.file_size = f.tell()
        try:
            self.offsets = read_footer(f, self.file_size, self.header.size)
            self.footer_ok = True
        except ContainerError as exc:
            warnings.warn(f"footer unusable ({exc}); scanning blocks sequentially")
            self.offsets = self._scan()
            self.footer_ok = False
        self._frame_counts: Optional[List[int]] = None

    @classmethod
    def from_bytes(cls, data: bytes) -> "ContainerReader":
        return cls(io.BytesIO(data))

    def _scan(self) -> List[int]:
        offsets = []
        pos = self.header.size
        total = 0
        self.f.seek(pos)
        while True:
            if self.header.frames_known and total >= self.header.n_frames:
                break
            magic = self.f.read(4)
            if magic != BLOCK_MAGIC:
                break
            self.f.seek(pos)
            block = read_block(self.f, self.header, len(offsets))
            offsets.append(pos)
            total += block.frame_count
            pos = self.f.tell()
        return offsets

    @property
    def n_blocks(self) -> int:
        return len(self.offsets)

    def seek_block(self, i: int) -> None:
        if not 0 <= i < len(self.offsets):
            raise ContainerError(f"block index {i} out of range 0..{len(self.offsets) - 1}")
        self.f.seek(self.offsets[i])

    def read_block(self, i: int) -> Block:
        self.seek_block(i)
        return read_block(self.f, self.header, i)

    def block_span(self, i: int) -> Tuple[int, int]:
        """Byte range ``[start, end)`` of block ``i``."""
        end = self.offsets[i + 1] if i + 1 < len(self.offsets) else self.footer_start
        return self.offsets[i], end

    @property
    def footer_start(self) -> int:
        if self.footer_ok:
            return self.file_size - _TRAILER.size - 8 * len(self.offsets) - 4
        return self.file_size

    def frame_counts(self) -> List[int]:
        if self._frame_counts is None:
            counts = []
            for off in self.offsets:
                self.f.seek(off)
                _, fc, _ = _BLOCK_HEAD.unpack(_read_exact(self.f, _BLOCK_HEAD.size, "block"))
                counts.append(fc)
            self._frame_counts = counts
        return self._frame_counts

    @property
    def n_frames(self) -> int:
        if self.header.frames_known:
            return self.header.n_frames
        return sum(self.frame_counts())


def write_raw(path: str, frames: np.ndarray) -> None:
    """Write little-endian f32 frames plus the ``<path>.json`` sidecar."""
    frames = np.asarray(frames, dtype="<f4")
    if frames.ndim != 2:
        raise ValueError("frames must be a 2-d array (frames, nd)")
    with open(path, "wb") as f:
        f.write(frames.tobytes())
    with open(sidecar_path(path), "w") as f:
        json.dump({"nd": int(frames.shape[1]), "frames": int(frames.shape[0])}, f)


def sidecar_path(path: str) -> str:
    return path + ".json"


def read_raw(path: str, nd: Optional[int] = None) -> np.ndarray:
    """Read a raw f32 trajectory; ``nd`` comes from the sidecar unless given."""
    expected = None
    if nd is None:
        try:
            with open(sidecar_path(path)) as f:
                meta = json.load(f)
        except FileNotFoundError:
            raise ContainerError(f"missing sidecar {sidecar_path(path)}") from None
        nd, expected = int(meta["nd"]), int(meta["frames"])
    with open(path, "rb") as f:
        data = f.read()
    return raw_from_bytes(data, nd, expected)


def raw_from_bytes(data: bytes, nd: int, frames: Optional[int] = None) -> np.ndarray:
    if nd < 1 or len(data) % (4 * nd):
        raise ContainerError(f"raw data of {len(data)} bytes is not a whole number of {nd}-value frames")
    arr = np.frombuffer(data, dtype="<f4").reshape(-1, nd)
    if frames is not None and arr.shape[0] != frames:
        raise ContainerError(f"sidecar declares {frames} frames, data holds {arr.shape[0]}")
    return arr
