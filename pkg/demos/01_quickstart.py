"""
Compress a trajectory, read it back, check the error
=====================================================
"""

import numpy as np

from pwlcodec import compress_array, decompress_array

# 2000 frames of 30 slowly drifting coordinates
rng = np.random.default_rng(0)
x = np.cumsum(rng.normal(0, 0.002, (2000, 30)), axis=0)

eps = 0.01
data = compress_array(x, eps)
y = decompress_array(data)

print("raw float32 bytes:", x.size * 4)
print("compressed bytes: ", len(data))
print("bits per sample:  ", 8 * len(data) / x.size)
print("max |x - y|:      ", np.abs(x - y).max(), "<=", eps)

# a tighter bound costs more bits
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    print(f"eps={eps:g}: {8 * len(compress_array(x, eps)) / x.size:.3f} bits/sample")
