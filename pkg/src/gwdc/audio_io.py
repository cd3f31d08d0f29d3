"""Minimal RIFF/WAVE reader and writer for single-channel analysis.

Reads PCM 16/24/32-bit and IEEE float32 files (first channel only) and
writes canonical 44-byte-header PCM files.
"""
from __future__ import annotations

import logging
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError, WavParseError

log = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class Signal:
    samples: np.ndarray
    sample_rate: int
    source_bit_depth: int = 16

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InputError("signal must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")


def _pcm_to_int(data: bytes, width: int) -> np.ndarray:
    if width == 2:
        return np.frombuffer(data, dtype="<i2").astype(np.int64)
    if width == 4:
        return np.frombuffer(data, dtype="<i4").astype(np.int64)
    # 24-bit: sign-extend three little-endian bytes
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    vals = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
    return np.where(vals >= 1 << 23, vals - (1 << 24), vals)


def read_wav(data: bytes) -> Signal:
    """Parse WAV bytes and return the first channel as floats."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavParseError("not a RIFF/WAVE file (bad header at offset 0)")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            if cid == b"data":
                raise WavParseError(f"data chunk at offset {pos} truncated ({len(body)} of {size} bytes)")
            raise WavParseError(f"chunk {cid!r} at offset {pos} truncated")
        if cid == b"fmt ":
            if size < 16:
                raise WavParseError(f"fmt chunk at offset {pos} too short ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise WavParseError("missing fmt chunk")
    if payload is None:
        raise WavParseError("missing data chunk")
    tag, channels, rate, _byte_rate, align, bits = fmt
    if tag == WAVE_FORMAT_EXTENSIBLE:
        raise WavParseError("WAVE_FORMAT_EXTENSIBLE files are not supported")
    if channels < 1:
        raise WavParseError("fmt chunk declares zero channels")
    if tag == WAVE_FORMAT_PCM and bits in (16, 24, 32):
        width = bits // 8
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        width = 4
    else:
        raise WavParseError(f"unsupported format tag {tag:#06x} with {bits} bits per sample")
    if align != channels * width:
        raise WavParseError(f"block align {align} inconsistent with {channels} x {width} bytes")
    frames = len(payload) // align
    if frames == 0:
        raise WavParseError("data chunk holds no complete frame")
    frame_bytes = np.frombuffer(payload[: frames * align], dtype=np.uint8).reshape(frames, align)
    first = frame_bytes[:, :width].tobytes()
    if tag == WAVE_FORMAT_IEEE_FLOAT:
        samples = np.frombuffer(first, dtype="<f4").astype(np.float64)
    else:
        samples = _pcm_to_int(first, width) / float(1 << (bits - 1))
    if channels > 1:
        log.info("WAV has %d channels; using channel 0", channels)
    log.debug("WAV mean value %.3e", float(samples.mean()))
    return Signal(samples, rate, bits)


def write_wav(signal: Signal, bit_depth: int = 16) -> bytes:
    """Serialize as mono PCM with a canonical 44-byte header.

    Samples outside [-1, 1] are clipped and reported with a warning.
    """
    if bit_depth not in (16, 24, 32):
        raise InputError(f"unsupported bit depth {bit_depth}")
    x = np.asarray(signal.samples, dtype=np.float64)
    over = int(np.count_nonzero((x > 1.0) | (x < -1.0)))
    if over:
        warnings.warn(f"{over} samples outside [-1, 1] clipped", RuntimeWarning, stacklevel=2)
    scale = 1 << (bit_depth - 1)
    ints = np.clip(np.round(np.clip(x, -1.0, 1.0) * scale), -scale, scale - 1).astype(np.int64)
    width = bit_depth // 8
    if width == 2:
        body = ints.astype("<i2").tobytes()
    elif width == 4:
        body = ints.astype("<i4").tobytes()
    else:
        u = (ints & 0xFFFFFF).astype("<u4").view(np.uint8).reshape(-1, 4)[:, :3]
        body = u.tobytes()
    rate = int(signal.sample_rate)
    pad = b"\x00" if len(body) & 1 else b""
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(body) + len(pad), b"WAVE",
        b"fmt ", 16, WAVE_FORMAT_PCM, 1, rate, rate * width, width, bit_depth,
        b"data", len(body),
    )
    return header + body + pad


def load_wav(path) -> Signal:
    with open(path, "rb") as fh:
        return read_wav(fh.read())


def save_wav(path, signal: Signal, bit_depth: int = 16) -> int:
    data = write_wav(signal, bit_depth)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)
