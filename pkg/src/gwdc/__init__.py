"""Sparse-dictionary lossy codec for single-channel signals.

Blocks of the signal are approximated by Optimized Orthogonal Matching
Pursuit over a redundant cosine/sine + translated-pulse dictionary; the
model is quantized, delta-coded and arithmetic-coded into a ``.gwdc`` file.
"""
from .container import (
    RateTarget,
    decode_signal,
    dump_header,
    encode,
    encode_signal,
    rate_control_search,
)
from .dictionary import Dictionary, DictionaryConfig, MatrixDictionary, PrototypeAtom, build_dictionary
from .errors import CodecError, ConfigurationError, CorruptionError, DimensionError, InputError
from .pursuit import AtomicDecomposition, Block, StopRule, oomp_approximate, partition_signal

__version__ = "0.1.0"
