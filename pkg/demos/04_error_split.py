"""
Splitting the error budget
==========================

The total bound eps is shared between rounding to the grid (eps_q = lam*eps)
and the line fit (eps_f = (1 - lam)*eps). A fine grid leaves a wide fit
tolerance; a coarse grid leaves little room for the lines.
"""

from pwlcodec import mdsim
from pwlcodec.analysis import LAMBDA_GRID, sweep

traj = mdsim.run(mdsim.SimConfig(n_particles=64, equil_steps=10_000, run_steps=32_000,
                                 subsample=16, seed=1))
rows = sweep(traj, "lambda", LAMBDA_GRID, eps=0.01)
smallest = min(r["compressed_bytes"] for r in rows)
for r in rows:
    bar = "#" * int(20 * r["compressed_bytes"] / smallest)
    print(f"lambda={r['parameter']:<5} {r['compressed_bytes']:7d} B  max err {r['max_error']:.4f}  {bar}")

# once the fit tolerance is no wider than the rounding noise of the grid
# (half a grid step, reached at lambda = 0.5), quantized staircases stop
# fitting on long lines and the size jumps
