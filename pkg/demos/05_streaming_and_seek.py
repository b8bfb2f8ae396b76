"""
Streaming writes and random access
==================================

With declared bounds the compressor never needs the whole trajectory. The
finished file has a block index, so any block can be decoded on its own.
"""

import io

import numpy as np

from pwlcodec import BlockPlan, Compressor, Decompressor, ErrorBudget
from pwlcodec.analysis import container_stats

rng = np.random.default_rng(3)
out = io.BytesIO()
with Compressor(out, nd=12, budget=ErrorBudget(0.01), lower=-50, upper=50,
                plan=BlockPlan(block_size=256, chunk_len=128)) as comp:
    x = np.zeros(12)
    frames = []
    for _ in range(10):  # ten batches arriving one after another
        batch = x + np.cumsum(rng.normal(0, 0.01, (100, 12)), axis=0)
        x = batch[-1]
        frames.append(batch)
        comp.write(batch)
frames = np.concatenate(frames)
data = out.getvalue()

dec = Decompressor.from_bytes(data)
print("frames:", dec.n_frames, "blocks:", dec.reader.n_blocks)
block2 = dec.block(2)  # only the header, the index and block 2 are read
print("block 2 max error:", np.abs(block2 - frames[512:768]).max())

stats = container_stats(data)
print("bits/sample:", round(stats.bits_per_sample, 4), "block bytes:", stats.block_bytes)
print("segment lengths:", stats.segment_hist)

# writing outside the declared bounds is refused
try:
    Compressor(io.BytesIO(), 1, ErrorBudget(0.01), 0, 1).write([[2.0]])
except ValueError as exc:
    print("rejected:", exc)
