"""Error-bounded lossy compression of multi-dimensional trajectories.

Each coordinate is quantized to a grid and approximated by a greedy
piecewise-linear fit; the resulting support vectors of all dimensions are
interleaved into one stream, packed with a group-width integer code and
stored in a seekable block container.
"""

from .codec import CodecError, decode_stream, encode_stream, optimal_partition
from .container import ContainerError, ContainerReader, read_raw, write_raw
from .quantizer import (ErrorBudget, InputError, RangeError, dequantize, quantize, unzigzag,
                        zigzag)
from .scheduler import (BlockPlan, Compressor, DecodeError, Decompressor, compress_array,
                        compress_stream, decompress_array, decompress_stream)
from .segmenter import ExtremaState, SegmentState, SupportVector, segment_series

__all__ = [
    "BlockPlan", "CodecError", "Compressor", "ContainerError", "ContainerReader", "DecodeError",
    "Decompressor", "ErrorBudget", "ExtremaState", "InputError", "RangeError", "SegmentState",
    "SupportVector", "compress_array", "compress_stream", "decode_stream", "decompress_array",
    "decompress_stream", "dequantize", "encode_stream", "optimal_partition", "quantize",
    "read_raw", "segment_series", "unzigzag", "write_raw", "zigzag",
]

__version__ = "0.1.0"
