"""
Bits per sample on the simulated benchmark
==========================================

A small soft-sphere simulation stands in for a molecular dynamics run. Most
coordinates move smoothly, so long line segments cover them and the cost
falls well below one bit per sample.
"""

import numpy as np

from pwlcodec import mdsim
from pwlcodec.analysis import rows_to_csv, sweep

config = mdsim.SimConfig(n_particles=64, equil_steps=10_000, run_steps=20_000, seed=42)
traj = mdsim.run(config)
print("trajectory:", traj.shape, "mean |step|:", np.abs(np.diff(traj, axis=0)).mean())

rows = sweep(traj, "eps", [1e-4, 1e-3, 1e-2, 1e-1, 1.0])
print(rows_to_csv(rows))

# coarser time sampling: fewer frames but each one less predictable
print(rows_to_csv(sweep(traj, "subsample", [1, 4, 16, 64])))
