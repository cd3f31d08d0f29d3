import struct

import numpy as np
import pytest

from gwdc.audio_io import Signal, read_wav, write_wav
from gwdc.errors import WavParseError


def pcm_bytes(ints, bits=16, channels=1, rate=8000, tag=1):
    width = bits // 8
    if bits == 16:
        body = np.asarray(ints, dtype="<i2").tobytes()
    elif bits == 32 and tag == 3:
        body = np.asarray(ints, dtype="<f4").tobytes()
    else:
        body = np.asarray(ints, dtype="<i4").tobytes()
    return struct.pack("<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(body), b"WAVE", b"fmt ", 16, tag,
                       channels, rate, rate * channels * width, channels * width, bits,
                       b"data", len(body)) + body


def test_full_scale_negative():
    s = read_wav(pcm_bytes([-32768, 0, 16384]))
    assert s.samples.tolist() == [-1.0, 0.0, 0.5]
    assert s.sample_rate == 8000 and s.source_bit_depth == 16


def test_stereo_takes_first_channel():
    s = read_wav(pcm_bytes([100, -5, 200, -6, 300, -7], channels=2))
    assert (s.samples * 32768).tolist() == [100, 200, 300]


def test_write_header_and_size():
    data = write_wav(Signal([0.0, 0.5, -0.5], 8000), 16)
    assert len(data) == 44 + 6
    assert data[:4] == b"RIFF" and data[36:40] == b"data"
    assert struct.unpack_from("<I", data, 40)[0] == 6


def test_16bit_round_trip_is_byte_identical(rng):
    ints = rng.integers(-32768, 32768, 1000)
    src = pcm_bytes(ints)
    again = write_wav(read_wav(src), 16)
    assert again[44:] == src[44:]


@pytest.mark.parametrize("bits", [16, 24, 32])
def test_round_trip_within_one_lsb(rng, bits):
    x = rng.uniform(-1, 1, 999)
    back = read_wav(write_wav(Signal(x, 44100), bits))
    assert back.samples.size == 999 and back.source_bit_depth == bits
    assert np.max(np.abs(back.samples - x)) <= 2.0 ** -(bits - 1)


def test_clipping_warns():
    with pytest.warns(RuntimeWarning, match="1 samples"):
        data = write_wav(Signal([1.5, 0.0], 8000), 16)
    assert read_wav(data).samples[0] == pytest.approx(1.0, abs=2 ** -15)


def test_float_wav():
    s = read_wav(pcm_bytes([0.25, -0.5], bits=32, tag=3))
    assert s.samples.tolist() == [0.25, -0.5]


def test_24bit_odd_length_is_padded():
    data = write_wav(Signal([0.1], 8000), 24)
    assert len(data) == 44 + 4
    assert struct.unpack_from("<I", data, 4)[0] == len(data) - 8
    assert read_wav(data).samples.size == 1


@pytest.mark.parametrize("mutate, match", [
    (lambda b: b"RIFX" + b[4:], "RIFF"),
    (lambda b: b[:20] + struct.pack("<H", 0xFFFE) + b[22:], "EXTENSIBLE"),
    (lambda b: b[:20] + struct.pack("<H", 2) + b[22:], "unsupported"),
    (lambda b: b[:-4], "truncated"),
    (lambda b: b[:36], "data chunk"),
])
def test_parse_errors(mutate, match):
    with pytest.raises(WavParseError, match=match):
        read_wav(mutate(pcm_bytes([1, 2, 3, 4])))
