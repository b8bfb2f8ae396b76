import io
from fractions import Fraction

import numpy as np
import pytest

from pwlcodec.codec import encode_stream
from pwlcodec.container import UNKNOWN_FRAMES, Chunk, ContainerError, ContainerReader, footer_bytes
from pwlcodec.quantizer import ErrorBudget, InputError, quantize_array, zigzag_array
from pwlcodec.scheduler import (BlockPlan, Compressor, DecodeError, Decompressor, SegmentScheduler,
                                assign_dimensions, block_vectors, choose_scale, compress_array,
                                compress_stream, decode_block_grid, decompress_array)
from pwlcodec.segmenter import segment_series

from oracles import grid_from_segments, random_trajectory


def collect(nd, chunk_len=1024):
    chunks = []
    sched = SegmentScheduler(nd, chunk_len, lambda n, v: chunks.append((n, v.copy())))
    return sched, chunks


def stored_pairs(chunks):
    """``(delta_q, delta_t)`` in storage order from double-ended chunk buffers."""
    out = []
    for n, v in chunks:
        zq = v[:n][::-1]
        dq = np.where(zq % 2 == 0, zq // 2, -(zq // 2)).astype(np.int64)
        out.extend(zip(dq.tolist(), v[n:].astype(np.int64).tolist()))
    return out


def test_drain_order_example():
    sched, chunks = collect(2)
    sched.start_block(0)
    sched.add(0, 1, 3, 30)  # dimension 1's short segment finishes first
    assert sched.drain() == 0  # dimension 0 is still expected at t=0
    sched.add(0, 0, 5, 50)
    sched.add(3, 1, 2, 20)
    assert sched.drain() == 3
    sched.end_block()
    assert stored_pairs(chunks) == [(50, 5), (30, 3), (20, 2)]


def test_drain_with_nothing_known():
    sched, chunks = collect(3)
    sched.start_block(7)
    before = list(sched.expected)
    assert sched.drain() == 0
    assert sched.expected == before and not sched.buf


def test_drain_single_dimension_advances_expected():
    sched, _ = collect(1)
    sched.start_block(0)
    sched.add(0, 0, 4, -1)
    assert sched.drain() == 1
    assert sched.expected == [(4, 0)]
    assert list(sched.buf) == [-1, 4]


def test_chunk_threshold_counts_slots():
    sched, chunks = collect(1, chunk_len=2)
    sched.start_block(0)
    for i in range(5):
        sched.add(i, 0, 1, i)
    sched.drain()
    assert [n for n, _ in chunks] == [2, 2]
    sched.end_block()
    assert [n for n, _ in chunks] == [2, 2, 1]
    assert stored_pairs(chunks) == [(i, 1) for i in range(5)]


@pytest.mark.parametrize("seed", range(20))
def test_random_discovery_order_matches_sort_oracle(seed):
    rng = np.random.default_rng(seed)
    nd, T = int(rng.integers(1, 9)), int(rng.integers(2, 300))
    segments = []
    for k in range(nd):
        t = 0
        while t < T - 1:
            dt = int(rng.integers(1, T - t))
            segments.append((t, k, dt, int(rng.integers(-50, 50))))
            t += dt
    sched, chunks = collect(nd, chunk_len=int(rng.integers(1, 40)))
    sched.start_block(0)
    # discovery order is by end time, ties broken randomly
    order = sorted(segments, key=lambda s: (s[0] + s[2], rng.random()))
    for s in order:
        sched.add(*s)
        sched.drain()
    sched.end_block()
    expected = [(dq, dt) for _, _, dt, dq in sorted(segments)]
    assert stored_pairs(chunks) == expected
    assert sched.peak_known <= len(segments)


def test_end_block_with_gap_is_an_error():
    sched, _ = collect(2)
    sched.start_block(0)
    sched.add(2, 0, 1, 0)
    with pytest.raises(RuntimeError):
        sched.end_block()


def vectors(data):
    reader = ContainerReader.from_bytes(data)
    out = []
    for i in range(reader.n_blocks):
        block = reader.read_block(i)
        dq, dt = block_vectors(block)
        out.append((block, dq, dt))
    return reader, out


def test_constant_input_single_vector():
    T = 37
    data = compress_array(np.full((T, 1), 3.25), 0.01, block_size=T)
    reader, blocks = vectors(data)
    assert reader.n_blocks == 1
    block, dq, dt = blocks[0]
    assert dq.tolist() == [0] and dt.tolist() == [T - 1]
    y = decompress_array(data)
    assert y.shape == (T, 1)
    assert np.all(y == quantize_array([3.25], 0.005)[0] * 0.01)


def test_empty_input_is_an_error():
    with pytest.raises(InputError):
        compress_stream([], ErrorBudget(0.1))
    with pytest.raises(InputError):
        compress_stream(iter([]), ErrorBudget(0.1), bounds=(0.0, 1.0))


def test_non_finite_input_is_an_error():
    x = np.zeros((5, 2))
    x[3, 1] = np.nan
    with pytest.raises(InputError):
        compress_array(x, 0.1)


def test_arity_mismatch_is_an_error():
    comp = Compressor(io.BytesIO(), 3, ErrorBudget(0.1), -1, 1)
    with pytest.raises(InputError):
        comp.write(np.zeros((2, 4)))


def test_random_walk_round_trip():
    rng = np.random.default_rng(0)
    x = np.cumsum(rng.normal(0, 0.01, (1000, 6)), axis=0)
    y = decompress_array(compress_array(x, 0.01))
    assert np.max(np.abs(x - y)) <= 0.01 * (1 + 1e-9)


@pytest.mark.parametrize("block_size, chunk_len", [(2, 1), (3, 2), (17, 5), (64, 1024), (1000, 3)])
def test_grid_matches_blockwise_segmentation(block_size, chunk_len):
    rng = np.random.default_rng(block_size)
    x = random_trajectory(rng, "walk", 150, 4, 0.02)
    budget = ErrorBudget(0.03, 0.4)
    data = compress_stream(x, budget, BlockPlan(block_size, chunk_len), kernel="reference")
    reader = ContainerReader.from_bytes(data)
    q = quantize_array(x, budget.eps_q)
    scale_bits, e = choose_scale(budget.eps_f_grid, int((q.max(0) - q.min(0)).max()), block_size)
    eps = Fraction(e, 1 << scale_bits)
    for i in range(reader.n_blocks):
        block = reader.read_block(i)
        start = i * block_size
        # the key frame opens the block; the next block's key frame is not part of it
        rows = q[start:start + block.frame_count]
        segs = [[tuple(sv) for sv in segment_series(rows[:, k], eps)] for k in range(4)]
        dq, dt = block_vectors(block)
        _, ks = assign_dimensions(dt, 4, block.frame_count)
        for k in range(4):
            assert list(zip(dq[ks == k].tolist(), dt[ks == k].tolist())) == segs[k]
        expected = grid_from_segments(rows[0], segs, 4, len(rows))
        assert np.allclose(decode_block_grid(block, 4), expected.astype(np.float64), rtol=0, atol=1e-9)


def test_grid_independent_of_chunk_len():
    rng = np.random.default_rng(3)
    x = random_trajectory(rng, "sine", 500, 5, 0.05)
    grids = []
    for chunk_len in (1, 7, 1024):
        data = compress_stream(x, ErrorBudget(0.02), BlockPlan(128, chunk_len))
        reader = ContainerReader.from_bytes(data)
        grids.append(np.concatenate([decode_block_grid(reader.read_block(i), 5)
                                     for i in range(reader.n_blocks)]))
    assert np.array_equal(grids[0], grids[1]) and np.array_equal(grids[0], grids[2])


def test_tiling_and_chunk_order():
    rng = np.random.default_rng(11)
    x = random_trajectory(rng, "walk", 700, 7, 0.03)
    data = compress_stream(x, ErrorBudget(0.02), BlockPlan(256, 9))
    reader, blocks = vectors(data)
    for block, dq, dt in blocks:
        ts, ks = assign_dimensions(dt, 7, block.frame_count)
        for k in range(7):
            assert dt[ks == k].sum() == block.frame_count - 1
        keys = list(zip(ts.tolist(), ks.tolist()))
        assert keys == sorted(keys) and len(set(keys)) == len(keys)


def test_kernels_give_identical_bytes():
    rng = np.random.default_rng(8)
    x = random_trajectory(rng, "noise", 300, 3, 0.01)
    a = compress_array(x, 0.02, block_size=100, kernel="divfree")
    b = compress_array(x, 0.02, block_size=100, kernel="reference")
    assert a == b
    assert compress_array(x, 0.02, block_size=100) == a


def test_flipped_payload_bit_is_detected():
    rng = np.random.default_rng(2)
    data = bytearray(compress_array(np.cumsum(rng.normal(0, 0.1, (300, 2)), axis=0), 0.01))
    reader = ContainerReader.from_bytes(bytes(data))
    start, end = reader.block_span(0)
    data[end - 5] ^= 0x10
    with pytest.raises(ContainerError, match="block 0"):
        decompress_array(bytes(data))


def test_corrupt_durations_desynchronise_the_queue():
    # re-encode a chunk with a wrong duration but a valid checksum
    rng = np.random.default_rng(4)
    x = np.cumsum(rng.normal(0, 0.1, (50, 2)), axis=0)
    data = compress_stream(x, ErrorBudget(0.05), BlockPlan(50, 1024))
    reader = ContainerReader.from_bytes(data)
    block = reader.read_block(0)
    dq, dt = block_vectors(block)
    dt[0] += 1
    values = np.concatenate([zigzag_array(dq)[::-1], dt.astype(np.uint64)])
    block.chunks = [Chunk(len(dq), encode_stream(values))]
    out = io.BytesIO()
    comp = Compressor(out, 2, ErrorBudget(0.05), x.min(0), x.max(0), BlockPlan(50, 1024), n_frames=50)
    body = block.to_bytes(comp.header)
    header = comp.header.to_bytes()
    forged = header + body + footer_bytes([len(header)])
    with pytest.raises(DecodeError, match="block 0"):
        decompress_array(forged)


def test_streaming_unknown_length_round_trip():
    rng = np.random.default_rng(6)
    x = np.cumsum(rng.normal(0, 0.05, (333, 4)), axis=0)
    out = io.BytesIO()
    with Compressor(out, 4, ErrorBudget(0.01), -100, 100, BlockPlan(64, 16)) as comp:
        for start in range(0, len(x), 50):
            comp.write(x[start:start + 50])
    data = out.getvalue()
    dec = Decompressor.from_bytes(data)
    assert dec.header.n_frames == UNKNOWN_FRAMES
    assert dec.n_frames == 333
    y = dec.read_all()
    assert np.max(np.abs(x - y)) <= 0.01 * (1 + 1e-9)
    frames = list(dec)
    assert len(frames) == 333


def test_streaming_bounds_violation():
    comp = Compressor(io.BytesIO(), 2, ErrorBudget(0.01), -1, 1)
    comp.write(np.zeros((3, 2)))
    with pytest.raises(InputError, match="bounds"):
        comp.write(np.array([[0.0, 1.5]]))


def test_declared_frame_count_enforced():
    comp = Compressor(io.BytesIO(), 1, ErrorBudget(0.01), -1, 1, n_frames=5)
    comp.write(np.zeros((4, 1)))
    with pytest.raises(InputError):
        comp.close()


def test_unknown_kernel():
    with pytest.raises(ValueError):
        Compressor(io.BytesIO(), 1, ErrorBudget(0.01), 0, 1, kernel="gpu")


def test_deterministic_output():
    rng = np.random.default_rng(9)
    x = random_trajectory(rng, "walk", 400, 3, 0.02)
    assert compress_array(x, 0.01) == compress_array(x.copy(), 0.01)


def test_single_frame_and_tiny_blocks():
    x = np.array([[1.0, -2.0]])
    assert np.allclose(decompress_array(compress_array(x, 0.1)), x, atol=0.1)
    rng = np.random.default_rng(1)
    x = rng.normal(0, 1, (9, 2))
    y = decompress_array(compress_array(x, 0.1, block_size=2, chunk_len=1))
    assert np.max(np.abs(x - y)) <= 0.1 * (1 + 1e-9)


def test_choose_scale_keeps_products_small():
    bits, e = choose_scale(0.5, 10, 2048)
    assert bits == 20 and e == 2**19
    bits, e = choose_scale(0.3, 2**40, 2048)
    assert bits < 20
    assert ((2**40 + 2) * 2**bits + e) * 2049 < 2**62
