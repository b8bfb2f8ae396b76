"""
What the segmenter does to one coordinate
=========================================

The samples are put on a grid, then covered greedily by straight lines that
stay within the fit tolerance. Each line is stored as one support vector
(change in grid value, number of steps).
"""

from fractions import Fraction

import numpy as np

from pwlcodec.quantizer import ErrorBudget, quantize_array
from pwlcodec.segmenter import SegmentState, reconstruct, segment_series

budget = ErrorBudget(0.05, lam=0.5)
t = np.arange(60)
x = np.sin(t / 9.0)
q = quantize_array(x, budget.eps_q)
tol = budget.dyadic_eps_f()
print("grid step:", budget.grid, " fit tolerance in grid units:", tol)

svs = segment_series(q, tol, "reference")
print(len(svs), "segments for", len(q), "samples")
p, start = int(q[0]), 0
for sv in svs:
    print(f"  t={start:3d}..{start + sv.delta_t:3d}  dq={sv.delta_q:+3d}  "
          f"ends at {reconstruct(p, sv, sv.delta_t, budget.eps_q):+.3f}")
    p += sv.delta_q
    start += sv.delta_t

# the division-free kernel makes the same choices
assert segment_series(q, tol, "divfree") == svs

# the slope cone narrows as samples are accepted, then a sample falls outside
s = SegmentState(0, Fraction(1))
for value in (0, 3, 10):
    ok = s.try_add(value)
    lo, hi = s.cone
    print(f"add {value:2d}: {'accepted' if ok else 'rejected'}, slopes [{lo}, {hi}]")
print("flushed:", s.flush(10))
