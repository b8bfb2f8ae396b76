"""Size accounting for containers and parameter sweeps over a trajectory."""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .container import ContainerReader
from .scheduler import BlockPlan, Decompressor, block_vectors, compress_stream
from .quantizer import ErrorBudget

F32_BITS = 32
CSV_COLUMNS = ("parameter", "compressed_bytes", "bits_per_sample", "max_error", "wall_time", "ratio")
LAMBDA_GRID = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
EPS_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


@dataclass
class ContainerStats:
    nd: int
    n_frames: int
    eps_q: float
    eps_f: float
    header_bytes: int
    footer_bytes: int
    block_bytes: List[int]
    n_vectors: int
    segment_hist: Dict[str, int] = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return self.header_bytes + sum(self.block_bytes) + self.footer_bytes

    @property
    def n_samples(self) -> int:
        return self.nd * self.n_frames

    @property
    def bits_per_sample(self) -> float:
        return 8.0 * self.total_bytes / self.n_samples

    @property
    def ratio(self) -> float:
        """Raw float32 size over compressed size."""
        return F32_BITS / self.bits_per_sample


def container_stats(data: bytes) -> ContainerStats:
    reader = ContainerReader.from_bytes(data)
    h = reader.header
    sizes = [end - start for start, end in (reader.block_span(i) for i in range(reader.n_blocks))]
    lengths = []
    for i in range(reader.n_blocks):
        _, dt = block_vectors(reader.read_block(i))
        lengths.append(dt)
    dt = np.concatenate(lengths) if lengths else np.zeros(0, dtype=np.int64)
    hist: Dict[str, int] = {}
    if dt.size:
        bins = np.floor(np.log2(dt)).astype(int)
        for b, count in zip(*np.unique(bins, return_counts=True)):
            hist[f"{1 << b}-{(2 << b) - 1}"] = int(count)
    first = reader.offsets[0] if reader.offsets else reader.file_size
    return ContainerStats(h.nd, reader.n_frames, h.eps_q, h.eps_f, first,
                          reader.file_size - reader.footer_start, sizes, int(dt.size), hist)


def measure(x: np.ndarray, budget: ErrorBudget, plan: BlockPlan, kernel: str = "divfree"):
    """Compress and decompress ``x``; returns ``(bytes, max_error, seconds)``."""
    start = time.perf_counter()
    data = compress_stream(x, budget, plan, kernel=kernel)
    elapsed = time.perf_counter() - start
    y = Decompressor.from_bytes(data).read_all()
    err = float(np.max(np.abs(y - np.asarray(x, dtype=np.float64)))) if x.size else 0.0
    return data, err, elapsed


def sweep(traj: np.ndarray, param: str, values: Sequence[float], eps: float = 0.01,
          lam: float = 0.5, plan: BlockPlan = BlockPlan(), kernel: str = "divfree") -> List[dict]:
    """One row per value of ``param`` (``eps``, ``lambda`` or ``subsample``).

    ``ratio`` is measured against the raw float32 size of the full,
    un-subsampled trajectory.
    """
    traj = np.asarray(traj, dtype=np.float32)
    raw_bytes = traj.size * 4
    rows = []
    for value in values:
        x, e, l = traj, eps, lam
        if param == "eps":
            e = float(value)
        elif param == "lambda":
            l = float(value)
        elif param == "subsample":
            x = traj[::int(value)]
        else:
            raise ValueError(f"unknown sweep parameter {param!r}")
        data, err, elapsed = measure(x.astype(np.float64), ErrorBudget(e, l), plan, kernel)
        rows.append({
            "parameter": value,
            "compressed_bytes": len(data),
            "bits_per_sample": 8.0 * len(data) / x.size,
            "max_error": err,
            "wall_time": elapsed,
            "ratio": raw_bytes / len(data),
        })
    return rows


def rows_to_csv(rows: List[dict]) -> str:
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        out.write(",".join(f"{row[c]:.6g}" if isinstance(row[c], float) else str(row[c])
                           for c in CSV_COLUMNS) + "\n")
    return out.getvalue()
