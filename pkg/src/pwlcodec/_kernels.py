"""Compiled per-frame segment kernels working on all dimensions at once.

All quantities are integers. Grid values are multiplied by ``scale`` (a power
of two) so the approximation tolerance ``eps`` is an exact integer too. A
slope bound is the rational ``num / (scale * dt)``.

State layout, one int64 row per dimension, columns:

    0 p      segment start (grid units)
    1 tau    samples accepted since the start
    2 last   q_last - p of the most recent accepted sample
    3..6     kernel specific slope-bound storage

The division-free kernel keeps the two extremal samples ``(t_lo, y_lo)`` and
``(t_hi, y_hi)`` (``y`` scaled); the reference kernel keeps the lower and upper
slope bounds as numerator/denominator pairs.

Preconditions (checked by the caller): every ``|q - p| * scale + eps`` times
the block size stays below 2**62.
"""

import numba
import numpy as np

P, TAU, LAST, A0, A1, A2, A3 = 0, 1, 2, 3, 4, 5, 6
STATE_COLS = 7

KERNEL_DIVFREE = 0
KERNEL_REFERENCE = 1


@numba.njit(cache=True)
def _ceil_div(a, b):
    return -((-a) // b)


@numba.njit(cache=True)
def _lower_bound(state, k, scale, eps, kernel):
    """Lower slope bound of dimension ``k`` as (numerator, denominator)."""
    if kernel == KERNEL_DIVFREE:
        return state[k, A1] - eps, scale * state[k, A0]
    return state[k, A0], state[k, A1]


@numba.njit(cache=True)
def _upper_bound(state, k, scale, eps, kernel):
    if kernel == KERNEL_DIVFREE:
        return state[k, A3] + eps, scale * state[k, A2]
    return state[k, A2], state[k, A3]


@numba.njit(cache=True)
def _endpoint(state, k, scale, eps, kernel):
    """Terminal offset of the open segment, clamped into the slope cone."""
    tau = state[k, TAU]
    lo_n, lo_d = _lower_bound(state, k, scale, eps, kernel)
    hi_n, hi_d = _upper_bound(state, k, scale, eps, kernel)
    lo = _ceil_div(tau * lo_n, lo_d)
    hi = (tau * hi_n) // hi_d
    dq = state[k, LAST]
    if dq < lo:
        dq = lo
    elif dq > hi:
        dq = hi
    return dq


@numba.njit(cache=True)
def _start(state, k, d, scale, eps, kernel):
    """Open a segment whose first accepted sample sits ``d`` grid units off."""
    y = d * scale
    state[k, TAU] = 1
    state[k, LAST] = d
    if kernel == KERNEL_DIVFREE:
        state[k, A0] = 1
        state[k, A1] = y
        state[k, A2] = 1
        state[k, A3] = y
    else:
        state[k, A0] = y - eps
        state[k, A1] = scale
        state[k, A2] = y + eps
        state[k, A3] = scale


@numba.njit(cache=True)
def _try_add_divfree(state, k, d, scale, eps):
    y = d * scale
    dt = state[k, TAU] + 1
    t_lo = state[k, A0]
    y_lo = state[k, A1]
    t_hi = state[k, A2]
    y_hi = state[k, A3]
    # cone test by cross multiplication
    empty = (y_lo - eps) * dt > (y + eps) * t_lo or (y - eps) * t_hi > (y_hi + eps) * dt
    # extrema update as conditional moves
    new_lo = (y - eps) * t_lo > (y_lo - eps) * dt
    new_hi = (y + eps) * t_hi < (y_hi + eps) * dt
    n_t_lo = dt if new_lo else t_lo
    n_y_lo = y if new_lo else y_lo
    n_t_hi = dt if new_hi else t_hi
    n_y_hi = y if new_hi else y_hi
    lo = _ceil_div(dt * (n_y_lo - eps), scale * n_t_lo)
    hi = (dt * (n_y_hi + eps)) // (scale * n_t_hi)
    if empty or lo > hi:
        return False
    state[k, A0] = n_t_lo
    state[k, A1] = n_y_lo
    state[k, A2] = n_t_hi
    state[k, A3] = n_y_hi
    state[k, TAU] = dt
    state[k, LAST] = d
    return True


@numba.njit(cache=True)
def _try_add_reference(state, k, d, scale, eps):
    dt = state[k, TAU] + 1
    # cone of slopes through the start that reach the new sample within eps
    c_lo_n = d * scale - eps
    c_hi_n = d * scale + eps
    c_d = scale * dt
    lo_n = state[k, A0]
    lo_d = state[k, A1]
    hi_n = state[k, A2]
    hi_d = state[k, A3]
    # intersection: larger lower bound, smaller upper bound
    if c_lo_n * lo_d > lo_n * c_d:
        lo_n = c_lo_n
        lo_d = c_d
    if c_hi_n * hi_d < hi_n * c_d:
        hi_n = c_hi_n
        hi_d = c_d
    if lo_n * hi_d > hi_n * lo_d:
        return False
    if _ceil_div(dt * lo_n, lo_d) > (dt * hi_n) // hi_d:
        return False
    state[k, A0] = lo_n
    state[k, A1] = lo_d
    state[k, A2] = hi_n
    state[k, A3] = hi_d
    state[k, TAU] = dt
    state[k, LAST] = d
    return True


@numba.njit(cache=True)
def reset(state, keyframe):
    for k in range(state.shape[0]):
        state[k, P] = keyframe[k]
        state[k, TAU] = 0
        state[k, LAST] = 0


@numba.njit(cache=True)
def step_frames(q, t0, state, scale, eps, kernel, out, decisions):
    """Feed frames ``q[i]`` (global index ``t0 + i``) through the segmenters.

    Finished segments are written to ``out`` rows as
    ``(t_start, k, delta_t, delta_q)`` in discovery order; returns the row
    count. When ``decisions`` is non-empty it receives 1 where a sample forced
    a flush and 0 where it extended the segment.
    """
    n = 0
    record = decisions.shape[0] > 0
    for i in range(q.shape[0]):
        t = t0 + i
        for k in range(q.shape[1]):
            p = state[k, P]
            d = q[i, k] - p
            if state[k, TAU] == 0:
                _start(state, k, d, scale, eps, kernel)
                if record:
                    decisions[i, k] = 0
                continue
            if kernel == KERNEL_DIVFREE:
                ok = _try_add_divfree(state, k, d, scale, eps)
            else:
                ok = _try_add_reference(state, k, d, scale, eps)
            if record:
                decisions[i, k] = 0 if ok else 1
            if ok:
                continue
            tau = state[k, TAU]
            dq = _endpoint(state, k, scale, eps, kernel)
            out[n, 0] = t - 1 - tau
            out[n, 1] = k
            out[n, 2] = tau
            out[n, 3] = dq
            n += 1
            state[k, P] = p + dq
            _start(state, k, q[i, k] - (p + dq), scale, eps, kernel)
    return n


@numba.njit(cache=True)
def flush_all(t, state, scale, eps, kernel, out):
    """Close every open segment; ``t`` is the first frame not covered."""
    n = 0
    for k in range(state.shape[0]):
        tau = state[k, TAU]
        if tau == 0:
            continue
        dq = _endpoint(state, k, scale, eps, kernel)
        out[n, 0] = t - 1 - tau
        out[n, 1] = k
        out[n, 2] = tau
        out[n, 3] = dq
        n += 1
        state[k, P] += dq
        state[k, TAU] = 0
        state[k, LAST] = 0
    return n


def new_state(nd):
    return np.zeros((nd, STATE_COLS), dtype=np.int64)
