"""Encode/decode pipelines, the ``.gwdc`` container format and rate control.

Container layout (little-endian throughout)::

    magic        4s   b"GWDC"
    version      u16
    sample_rate  u32
    length       u64  original sample count N
    pad          u32  zero samples appended to fill the last block
    block_size   u32
    delta        f64  quantization step
    dictionary   block_size u32, trig_size u32, prototype count u8,
                 then per prototype: support u16, support x f64 samples
    block_count  u32  Q, with N = Q * block_size - pad
    3 x stream   symbol_count u64, alphabet_size u32, payload_length u64,
                 payload bytes; in the order indices, magnitudes, signs

A model without any atoms stores three empty streams.
"""
from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import entropy
from .dictionary import Dictionary, DictionaryConfig, PrototypeAtom
from .entropy import CodedStream, SymbolStream
from .errors import ConfigurationError, CorruptionError, InputError
from .metrics import block_snr_stats, snr
from .pursuit import (
    AtomicDecomposition,
    StopRule,
    approximate_blocks,
    assemble_signal,
    oomp_path,
    partition_signal,
    reconstruct_block,
)
from .quantizer import QuantizedBlock, default_delta, dequantize_block, quantize_block

MAGIC = b"GWDC"
VERSION = 1

_FIXED = struct.Struct("<4sHIQIId")
_STREAM = struct.Struct("<QIQ")


@functools.lru_cache(maxsize=8)
def get_dictionary(config: DictionaryConfig) -> Dictionary:
    """Shared, immutable dictionary instance per configuration."""
    return Dictionary(config)


@dataclass
class Header:
    sample_rate: int
    length: int
    pad: int
    block_size: int
    delta: float
    dictionary: DictionaryConfig
    block_count: int
    version: int = VERSION


@dataclass
class EncodedFile:
    header: Header
    streams: tuple[CodedStream, CodedStream, CodedStream]

    def to_bytes(self) -> bytes:
        h = self.header
        out = bytearray(_FIXED.pack(MAGIC, h.version, h.sample_rate, h.length, h.pad, h.block_size, h.delta))
        cfg = h.dictionary
        out += struct.pack("<IIB", cfg.block_size, cfg.trig_size, len(cfg.prototypes))
        for p in cfg.prototypes:
            out += struct.pack(f"<H{p.support}d", p.support, *p.samples)
        out += struct.pack("<I", h.block_count)
        for s in self.streams:
            out += _STREAM.pack(s.symbol_count, s.alphabet_size, len(s.payload))
            out += s.payload
        return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str | struct.Struct, what: str):
        st = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        if self.pos + st.size > len(self.data):
            raise CorruptionError(f"truncated {what}: need {st.size} bytes, "
                                  f"{len(self.data) - self.pos} left", self.pos)
        vals = st.unpack_from(self.data, self.pos)
        self.pos += st.size
        return vals

    def raw(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptionError(f"truncated {what}: need {n} bytes, {len(self.data) - self.pos} left", self.pos)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def parse_container(data: bytes) -> EncodedFile:
    r = _Reader(bytes(data))
    magic, version, rate, length, pad, block_size, delta = r.take(_FIXED, "header")
    if magic != MAGIC:
        raise CorruptionError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise CorruptionError(f"unsupported version {version}", 4)
    at = r.pos
    cfg_block, trig_size, nproto = r.take("<IIB", "dictionary config")
    protos = []
    for k in range(nproto):
        (support,) = r.take("<H", f"prototype {k + 1} length")
        samples = r.take(f"<{support}d", f"prototype {k + 1} samples")
        try:
            protos.append(PrototypeAtom(samples, f"p{k + 1}"))
        except ConfigurationError as exc:
            raise CorruptionError(str(exc), r.pos) from exc
    try:
        cfg = DictionaryConfig(cfg_block, trig_size, tuple(protos))
    except ConfigurationError as exc:
        raise CorruptionError(f"invalid dictionary config: {exc}", at) from exc
    if cfg_block != block_size:
        raise CorruptionError(f"dictionary block size {cfg_block} != header block size {block_size}", at)
    at = r.pos
    (block_count,) = r.take("<I", "block count")
    if block_count < 1 or pad >= block_size or block_count * block_size - pad != length:
        raise CorruptionError(
            f"inconsistent geometry: Q={block_count}, block_size={block_size}, pad={pad}, N={length}", at)
    if not (delta > 0 and math.isfinite(delta)):
        raise CorruptionError(f"invalid quantization step {delta}", _FIXED.size - 8)
    if rate == 0:
        raise CorruptionError("zero sample rate", 6)
    streams = []
    for name in ("index", "magnitude", "sign"):
        at = r.pos
        count, alphabet, nbytes = r.take(_STREAM, f"{name} stream header")
        payload = r.raw(nbytes, f"{name} stream payload")
        if not 1 <= alphabet <= entropy.MAX_ALPHABET or (count == 0) != (nbytes == 0):
            raise CorruptionError(f"invalid {name} stream metadata", at)
        # a block never holds more than block_size independent atoms
        limit = block_count * block_size + (block_count - 1 if name == "index" else 0)
        if count > limit or (name == "sign" and alphabet != 2 and count):
            raise CorruptionError(f"{name} stream declares {count} symbols over alphabet {alphabet}", at)
        streams.append(CodedStream(payload, count, alphabet))
    if r.pos != len(r.data):
        raise CorruptionError(f"{len(r.data) - r.pos} trailing bytes", r.pos)
    header = Header(rate, length, pad, block_size, delta, cfg, block_count, version)
    return EncodedFile(header, tuple(streams))


def _stream_offsets(data: bytes) -> list[int]:
    """Byte offsets of the three stream records, for error messages."""
    r = _Reader(data)
    r.take(_FIXED, "header")
    _, _, nproto = r.take("<IIB", "dictionary config")
    for _ in range(nproto):
        (support,) = r.take("<H", "prototype")
        r.raw(8 * support, "prototype")
    r.take("<I", "block count")
    offsets = []
    for _ in range(3):
        offsets.append(r.pos)
        _, _, nbytes = r.take(_STREAM, "stream")
        r.raw(nbytes, "stream")
    return offsets


# model <-> streams


def model_to_streams(qblocks) -> tuple[CodedStream, CodedStream, CodedStream]:
    if sum(len(b) for b in qblocks) == 0:
        return (CodedStream(b"", 0, 1), CodedStream(b"", 0, 1), CodedStream(b"", 0, 2))
    return entropy.encode_model(qblocks)


def decode_model(data: bytes) -> tuple[Header, list[QuantizedBlock]]:
    """Parse a container and recover the quantized model of every block."""
    encoded = parse_container(data)
    h = encoded.header
    offsets = _stream_offsets(bytes(data))
    decoded = []
    for name, coded, at in zip(("index", "magnitude", "sign"), encoded.streams, offsets):
        try:
            decoded.append(entropy.arith_decode(coded).symbols)
        except CorruptionError as exc:
            raise CorruptionError(f"{name} stream: {exc}", at) from exc
    ind, mags, signs = decoded
    if not ind and not mags and not signs:
        return h, [QuantizedBlock.empty() for _ in range(h.block_count)]
    try:
        per_block = entropy.parse_index_stream(SymbolStream(ind, encoded.streams[0].alphabet_size), h.block_count)
    except CorruptionError as exc:
        raise CorruptionError(f"index stream: {exc}", offsets[0]) from exc
    total = sum(len(b) for b in per_block)
    if total != len(mags) or total != len(signs):
        raise CorruptionError(
            f"stream lengths disagree: {total} indices, {len(mags)} magnitudes, {len(signs)} signs", offsets[0])
    n_atoms = get_dictionary(h.dictionary).total_atoms
    qblocks, k = [], 0
    for idx in per_block:
        if idx and idx[-1] > n_atoms:
            raise CorruptionError(f"atom index {idx[-1]} beyond dictionary size {n_atoms}", offsets[0])
        m, s = mags[k : k + len(idx)], signs[k : k + len(idx)]
        if any(v < 1 for v in m):
            raise CorruptionError("zero magnitude in coefficient stream", offsets[1])
        qblocks.append(QuantizedBlock(idx, m, s))
        k += len(idx)
    return h, qblocks


def reconstruct_model(qblocks, delta: float, dictionary, pad: int) -> np.ndarray:
    """Dequantize and synthesize every block, then assemble the signal."""
    blocks = []
    for q, qb in enumerate(qblocks, start=1):
        decomp = AtomicDecomposition(q, qb.atom_indices.tolist(), dequantize_block(qb, delta).tolist())
        blocks.append(reconstruct_block(decomp, dictionary))
    return assemble_signal(blocks, pad)


# pipelines


@dataclass
class Encoding:
    data: bytes
    decomps: list[AtomicDecomposition]
    qblocks: list[QuantizedBlock]
    reconstruction: np.ndarray  # encoder-side view of what the decoder outputs
    delta: float
    header: Header

    @property
    def atom_counts(self) -> list[int]:
        return [len(b) for b in self.qblocks]


def _as_signal(signal):
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InputError("signal must be a non-empty 1-D array")
    if not np.all(np.isfinite(x)):
        raise InputError("signal contains non-finite samples")
    return x


def encode_decomposition(signal, sample_rate: int, dict_config: DictionaryConfig, decomps, delta: float,
                         pad: int) -> Encoding:
    """Quantize already computed decompositions and build the container."""
    dictionary = get_dictionary(dict_config)
    qblocks = [quantize_block(d, delta) for d in decomps]
    top = max((int(b.magnitudes.max()) for b in qblocks if len(b)), default=0)
    if top >= entropy.MAX_ALPHABET:
        raise ConfigurationError(f"quantization step {delta:g} too fine: magnitude {top} exceeds the coder "
                                 f"alphabet ({entropy.MAX_ALPHABET})")
    streams = model_to_streams(qblocks)
    header = Header(int(sample_rate), len(signal), pad, dict_config.block_size, float(delta), dict_config,
                    len(decomps))
    data = EncodedFile(header, streams).to_bytes()
    recon = reconstruct_model(qblocks, delta, dictionary, pad)
    return Encoding(data, list(decomps), qblocks, recon, float(delta), header)


def encode(signal, sample_rate: int, dict_config: DictionaryConfig | None = None,
           stop: StopRule | None = None, delta: float | None = None, workers: int = 1) -> Encoding:
    """Full encoder: partition, pursue, quantize, build streams, code.

    ``stop`` defaults to a per-block target of 60 dB; ``delta`` defaults to
    the largest coefficient magnitude divided by 2**16.
    """
    x = _as_signal(signal)
    dict_config = dict_config or DictionaryConfig()
    stop = stop or StopRule(target_block_snr=60.0)
    dictionary = get_dictionary(dict_config)
    blocks, pad = partition_signal(x, dict_config.block_size)
    decomps = approximate_blocks(blocks, dictionary, stop, workers)
    if delta is None:
        delta = default_delta(decomps)
    return encode_decomposition(x, sample_rate, dict_config, decomps, delta, pad)


def encode_signal(signal, sample_rate: int, dict_config: DictionaryConfig | None = None,
                  stop: StopRule | None = None, delta: float | None = None, workers: int = 1) -> bytes:
    return encode(signal, sample_rate, dict_config, stop, delta, workers).data


def decode_signal(data: bytes) -> tuple[np.ndarray, int]:
    header, qblocks = decode_model(data)
    dictionary = get_dictionary(header.dictionary)
    return reconstruct_model(qblocks, header.delta, dictionary, header.pad), header.sample_rate


def dump_header(data: bytes) -> str:
    encoded = parse_container(data)
    h = encoded.header
    lines = [
        f"magic={MAGIC.decode()}",
        f"version={h.version}",
        f"sample_rate={h.sample_rate}",
        f"length={h.length}",
        f"pad={h.pad}",
        f"block_size={h.block_size}",
        f"delta={h.delta!r}",
        f"trig_size={h.dictionary.trig_size}",
        f"prototypes={len(h.dictionary.prototypes)}",
    ]
    for k, p in enumerate(h.dictionary.prototypes, start=1):
        lines.append(f"prototype_{k}=" + ",".join(repr(v) for v in p.samples))
    lines.append(f"block_count={h.block_count}")
    for name, s in zip(("indices", "magnitudes", "signs"), encoded.streams):
        lines.append(f"stream_{name}=symbols:{s.symbol_count},alphabet:{s.alphabet_size},bytes:{len(s.payload)}")
    lines.append(f"file_bytes={len(data)}")
    return "\n".join(lines)


# rate control


MATCH_SNR = "match_snr"
MATCH_MEAN_SNR = "match_mean_snr"
FIXED = "fixed"


@dataclass(frozen=True)
class RateTarget:
    """What the encoder should hit.

    In the match modes ``target_db`` is the global SNR or the mean block snr
    to reach, accepted within ``[target_db, target_db + tolerance_db]``.  In
    ``fixed`` mode ``stop`` and ``delta`` are used as given.
    """

    mode: str = MATCH_SNR
    target_db: float | None = None
    tolerance_db: float = 0.5
    stop: StopRule | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.mode in (MATCH_SNR, MATCH_MEAN_SNR):
            if self.target_db is None or not self.target_db > 0:
                raise ConfigurationError("match modes need a positive target_db")
            if not self.tolerance_db > 0:
                raise ConfigurationError("tolerance_db must be positive")
        elif self.mode == FIXED:
            if self.stop is None:
                raise ConfigurationError("fixed mode needs a stopping rule")
        else:
            raise ConfigurationError(f"unknown rate mode {self.mode!r}")


@dataclass
class RateResult:
    encoding: Encoding
    quality_db: float | None  # per-block target that produced the model
    delta: float
    achieved_db: float  # value of the matched metric on the decoded signal
    converged: bool
    steps: int
    tried: list[tuple[float, float, float, int]] = field(default_factory=list)  # (quality, delta, metric, bytes)

    @property
    def size(self) -> int:
        return len(self.encoding.data)


# per-block quality offsets above the target explored by the search
DEFAULT_QUALITY_OFFSETS = (0.5, 1.0, 2.0, 3.0, 5.0)
MAX_BISECTION_STEPS = 40
# finest step tried, relative to the largest coefficient
FINEST_STEP = 2.0 ** -20


def _metric(mode, x, recon, block_size):
    if mode == MATCH_SNR:
        return snr(x, recon)
    return block_snr_stats(x, recon, block_size).mean_snr_db


class _FastModel:
    """Quantization-only evaluation of a fixed set of decompositions."""

    def __init__(self, decomps, dictionary, length):
        self.decomps = decomps
        self.coeffs = [np.asarray(d.coefficients) for d in decomps]
        self.atoms = [dictionary.atoms(d.atom_indices) if d.atom_indices else None for d in decomps]
        self.block_size = dictionary.block_size
        self.length = length
        self.peak = max((float(np.abs(c).max()) for c in self.coeffs if c.size), default=0.0)

    def reconstruct(self, delta):
        out = np.zeros((len(self.decomps), self.block_size))
        for q, (c, a) in enumerate(zip(self.coeffs, self.atoms)):
            if a is not None:
                cq = np.sign(c) * delta * np.floor(np.abs(c) / delta + 0.5)
                out[q] = cq @ a
        return out.ravel()[: self.length]


def rate_control_search(signal, dict_config: DictionaryConfig | None, target: RateTarget,
                        sample_rate: int = 8000, workers: int = 1,
                        quality_offsets=DEFAULT_QUALITY_OFFSETS,
                        max_steps: int = MAX_BISECTION_STEPS) -> RateResult:
    """Choose per-block quality and quantization step to meet ``target``.

    Per-block tolerances are ``||f_q|| * 10**(-g / 20)`` for a global quality
    ``g``.  For each ``g = target + offset`` a single pursuit pass provides
    the model, then ``delta`` is bisected (log scale) for the coarsest step
    whose decoded metric lies in the accepted window.  Among the qualities
    that succeed the smallest file wins.  If none succeeds the closest
    result is returned with ``converged=False``.
    """
    x = _as_signal(signal)
    dict_config = dict_config or DictionaryConfig()
    dictionary = get_dictionary(dict_config)
    blocks, pad = partition_signal(x, dict_config.block_size)

    if target.mode == FIXED:
        decomps = approximate_blocks(blocks, dictionary, target.stop, workers)
        delta = target.delta if target.delta is not None else default_delta(decomps)
        enc = encode_decomposition(x, sample_rate, dict_config, decomps, delta, pad)
        achieved = snr(x, enc.reconstruction) if np.any(x) else math.inf
        return RateResult(enc, None, delta, achieved, True, 0)

    lo_db, hi_db = target.target_db, target.target_db + target.tolerance_db
    qualities = sorted(target.target_db + o for o in quality_offsets)
    norms = [float(np.linalg.norm(b.samples)) for b in blocks]

    def run(k):
        tols = [norms[k] * 10.0 ** (-g / 20.0) for g in qualities]
        return oomp_path(blocks[k], dictionary, tols)

    if workers > 1 and len(blocks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(run, range(len(blocks))))
    else:
        paths = [run(k) for k in range(len(blocks))]

    tried = []
    best = None  # (converged, size or -metric, quality, delta)
    total_steps = 0
    fallback = None
    for j, g in enumerate(qualities):
        decomps = [p[j] for p in paths]
        model = _FastModel(decomps, dictionary, x.size)
        if model.peak == 0.0:
            continue
        d_lo, d_hi = model.peak * FINEST_STEP, model.peak * 4.0
        m_lo = _metric(target.mode, x, model.reconstruct(d_lo), dict_config.block_size)
        if m_lo < lo_db:
            if fallback is None or m_lo > fallback[0]:
                fallback = (m_lo, g, d_lo)
            continue
        found = None
        for _ in range(max_steps):
            total_steps += 1
            mid = math.sqrt(d_lo * d_hi)
            m = _metric(target.mode, x, model.reconstruct(mid), dict_config.block_size)
            if m >= lo_db:
                d_lo, m_lo = mid, m
                if m <= hi_db:
                    found = mid
                    break
            else:
                d_hi = mid
        if found is None:
            if fallback is None or m_lo > fallback[0]:
                fallback = (m_lo, g, d_lo)
            continue
        enc = encode_decomposition(x, sample_rate, dict_config, decomps, found, pad)
        achieved = _metric(target.mode, x, enc.reconstruction, dict_config.block_size)
        tried.append((g, found, achieved, len(enc.data)))
        if lo_db <= achieved <= hi_db and (best is None or len(enc.data) < best.size):
            best = RateResult(enc, g, found, achieved, True, total_steps)
    if best is not None:
        best.steps = total_steps
        best.tried = tried
        return best
    if fallback is None:
        # nothing to approximate (all-zero signal)
        enc = encode_decomposition(x, sample_rate, dict_config, [p[-1] for p in paths], 1.0, pad)
        return RateResult(enc, qualities[-1], 1.0, math.inf, False, total_steps, tried)
    _, g, delta = fallback
    decomps = [p[qualities.index(g)] for p in paths]
    enc = encode_decomposition(x, sample_rate, dict_config, decomps, delta, pad)
    achieved = _metric(target.mode, x, enc.reconstruction, dict_config.block_size)
    return RateResult(enc, g, delta, achieved, False, total_steps, tried)
