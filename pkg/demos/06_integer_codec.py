"""
The integer codec
=================

Support vectors are stored as unsigned integers in groups that share a bit
width. Group boundaries are chosen to minimise the total size.
"""

import numpy as np

from pwlcodec.codec import encode_stream, encoded_bits, optimal_partition
from pwlcodec.quantizer import zigzag_array

values = [0, 0, 0, 0, 0, 0, 1, 0, 0, 37, 41, 39, 512, 0, 0, 0]
for g in optimal_partition(values):
    print(f"  {g.count:2d} values at {g.width:2d} bits")
print("total bits:", encoded_bits(optimal_partition(values)), "bytes:", len(encode_stream(values)))

# signed changes go through the zigzag map first: 0, -1, 1, -2, 2 -> 0, 3, 2, 5, 4
print(zigzag_array([0, -1, 1, -2, 2]))

# small value changes and long durations: keeping the two kinds apart pays
rng = np.random.default_rng(0)
dq = zigzag_array(rng.integers(-1, 2, 500))
dt = rng.integers(100, 128, 500).astype(np.uint64)
print("separated:  ", len(encode_stream(np.concatenate([dq[::-1], dt]))), "bytes")
print("interleaved:", len(encode_stream(np.column_stack([dq, dt]).ravel())), "bytes")
