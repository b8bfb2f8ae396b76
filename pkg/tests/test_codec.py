import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwlcodec.codec import (CodecError, CodecGroup, decode_stream, encode_stream, encoded_bits,
                            keyframe_width, optimal_partition, pack_fixed, pack_fixed_widths,
                            unpack_fixed, unpack_fixed_widths)
from pwlcodec.quantizer import zigzag_array

from oracles import bit_width, exhaustive_partition_bits

u32 = st.integers(0, 2**32 - 1)


def test_partition_examples():
    assert optimal_partition([0, 0, 0, 7]) == [CodecGroup(3, 4)]
    assert optimal_partition([0] * 64 + [7]) == [CodecGroup(0, 64), CodecGroup(3, 1)]
    assert optimal_partition([]) == []


def test_thirty_one_bit_values_use_the_wide_code():
    groups = optimal_partition([2**30 + 5])
    assert groups == [CodecGroup(32, 1)]
    assert decode_stream(encode_stream([2**30 + 5]), 1).tolist() == [2**30 + 5]


@pytest.mark.parametrize("values, nbytes", [([0] * 64, 2), ([2**32 - 1], 6), ([], 0)])
def test_encoded_sizes(values, nbytes):
    assert len(encode_stream(values)) == nbytes


def test_values_beyond_32_bits_rejected():
    with pytest.raises(CodecError):
        encode_stream([2**32])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=12).map(
    lambda bits: [(1 << b) - 1 if b < 33 else 0 for b in bits]))
def test_partition_matches_exhaustive_oracle(values):
    widths = [bit_width(v) for v in values]
    assert encoded_bits(optimal_partition(values)) == exhaustive_partition_bits(widths)


@settings(max_examples=200, deadline=None)
@given(st.lists(u32, max_size=400))
def test_round_trip(values):
    assert decode_stream(encode_stream(values), len(values)).tolist() == values


@settings(max_examples=100, deadline=None)
@given(st.lists(u32, min_size=1, max_size=300))
def test_never_worse_than_one_fixed_width(values):
    groups = optimal_partition(values)
    assert sum(g.count for g in groups) == len(values)
    assert all(1 <= g.count <= 64 for g in groups)
    w = max(bit_width(v) for v in values)
    n_groups = -(-len(values) // 64)
    assert encoded_bits(groups) <= n_groups * 11 + len(values) * w


def test_double_ended_layout_beats_interleaved():
    rng = np.random.default_rng(5)
    n = 1024
    dq = rng.integers(-1, 2, n)
    dt = rng.integers(100, 128, n)
    zq = zigzag_array(dq)
    double_ended = np.concatenate([zq[::-1], dt.astype(np.uint64)])
    interleaved = np.column_stack([zq, dt.astype(np.uint64)]).ravel()
    assert len(encode_stream(double_ended)) < len(encode_stream(interleaved))


def test_decode_rejects_truncation():
    data = encode_stream(np.arange(100, dtype=np.uint64))
    with pytest.raises(CodecError, match="truncated"):
        decode_stream(data[:-3], 100)


def test_decode_rejects_trailing_garbage():
    data = encode_stream([1, 2, 3])
    with pytest.raises(CodecError):
        decode_stream(data + b"\x00", 3)
    padded = bytearray(data)
    padded[-1] |= 0x80
    with pytest.raises(CodecError):
        decode_stream(bytes(padded), 3)


def test_decode_rejects_overlong_group():
    data = encode_stream([5] * 10)
    with pytest.raises(CodecError):
        decode_stream(data, 4)


def test_pack_fixed_examples():
    data = pack_fixed(np.arange(16), 4)
    assert len(data) == 8
    assert unpack_fixed(data, 4, 16).tolist() == list(range(16))
    with pytest.raises(CodecError):
        pack_fixed([16], 4)
    with pytest.raises(CodecError):
        pack_fixed([1], 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 64), st.integers(0, 2**64 - 1)), max_size=60))
def test_fixed_width_round_trip(pairs):
    widths = [w for w, _ in pairs]
    values = [v & ((1 << w) - 1) for w, v in pairs]
    data = pack_fixed_widths(np.array(values, dtype=np.uint64), widths)
    assert len(data) == (sum(widths) + 7) // 8
    assert unpack_fixed_widths(data, widths).tolist() == values


def test_unpack_fixed_truncated():
    with pytest.raises(CodecError):
        unpack_fixed(b"\x00", 4, 3)


@pytest.mark.parametrize("extent, eps_q, width", [(16, 0.5, 4), (0, 0.5, 1), (1, 0.5, 1), (17, 0.5, 5)])
def test_keyframe_width(extent, eps_q, width):
    assert keyframe_width(extent, eps_q) == width
