import struct

import numpy as np
import pytest

from gwdc.container import (
    FIXED,
    MATCH_MEAN_SNR,
    MATCH_SNR,
    RateTarget,
    decode_model,
    decode_signal,
    dump_header,
    encode,
    encode_signal,
    get_dictionary,
    parse_container,
    rate_control_search,
)
from gwdc.dictionary import DictionaryConfig, PrototypeAtom
from gwdc.errors import ConfigurationError, CorruptionError
from gwdc.metrics import block_snr_stats, snr
from gwdc.pursuit import StopRule, assemble_signal, reconstruct_block

SMALL = DictionaryConfig(64, 128)


def test_all_zero_signal():
    enc = encode(np.zeros(4096), 8000, DictionaryConfig(2048, 4096))
    assert enc.header.block_count == 2
    parsed = parse_container(enc.data)
    assert all(s.symbol_count == 0 and s.payload == b"" for s in parsed.streams)
    out, rate = decode_signal(enc.data)
    assert rate == 8000 and out.size == 4096 and not np.any(out)


def test_in_span_signal_fine_step(rng):
    d = get_dictionary(SMALL)
    idx = rng.choice(d.total_atoms, 5, replace=False) + 1
    x = np.concatenate([rng.uniform(0.5, 2, 5) @ d.atoms(idx) for _ in range(3)])
    enc = encode(x, 8000, SMALL, StopRule(residual_tolerance=1e-9), delta=1e-6)
    out, _ = decode_signal(enc.data)
    assert snr(x, out) >= 120


def test_step_too_fine_for_coder(rng):
    with pytest.raises(ConfigurationError, match="too fine"):
        encode(rng.standard_normal(64), 8000, SMALL, StopRule(target_block_snr=10), delta=1e-12)


def test_decode_equals_encoder_reconstruction(rng):
    x = rng.standard_normal(64 * 5 + 17)
    enc = encode(x, 16000, SMALL, StopRule(target_block_snr=25))
    out, rate = decode_signal(enc.data)
    assert rate == 16000 and out.size == x.size
    assert out.tobytes() == enc.reconstruction.tobytes()


def test_model_round_trip(rng):
    x = rng.standard_normal(64 * 4)
    enc = encode(x, 8000, SMALL, StopRule(target_block_snr=20))
    header, qblocks = decode_model(enc.data)
    assert qblocks == enc.qblocks
    assert header.dictionary == SMALL and header.pad == 0


def test_encode_deterministic_across_workers(rng):
    x = rng.standard_normal(64 * 6)
    outs = {encode_signal(x, 8000, SMALL, StopRule(target_block_snr=30), workers=w) for w in (1, 2, 8)}
    assert len(outs) == 1


def test_custom_prototypes_survive_container(rng):
    cfg = DictionaryConfig(32, 32, (PrototypeAtom((1.0, -1.0, 0.5)),))
    x = rng.standard_normal(70)
    enc = encode(x, 8000, cfg, StopRule(target_block_snr=15))
    header, _ = decode_model(enc.data)
    assert header.dictionary.prototypes[0].samples == cfg.prototypes[0].samples
    assert decode_signal(enc.data)[0].tobytes() == enc.reconstruction.tobytes()


def test_quantization_error_bound(rng):
    x = rng.standard_normal(64 * 3)
    delta = 0.05
    enc = encode(x, 8000, SMALL, StopRule(target_block_snr=20), delta=delta)
    d = get_dictionary(SMALL)
    exact = assemble_signal([reconstruct_block(dec, d) for dec in enc.decomps], enc.header.pad)
    total_atoms = sum(dec.iterations for dec in enc.decomps)
    assert np.linalg.norm(enc.reconstruction - exact) <= delta / 2 * total_atoms


def test_coarser_step_never_grows_file(rng):
    x = rng.standard_normal(64 * 4)
    stop = StopRule(target_block_snr=30)
    sizes = [len(encode_signal(x, 8000, SMALL, stop, delta=dl)) for dl in (1e-4, 1e-3, 1e-2, 1e-1)]
    assert sizes == sorted(sizes, reverse=True)


def corrupt_cases(data):
    yield data[:3]
    yield data[:-1]
    yield data + b"\x00"
    yield b"XXXX" + data[4:]
    yield data[:4] + struct.pack("<H", 99) + data[6:]


def test_corruption_detected_with_offset(rng):
    data = encode_signal(rng.standard_normal(200), 8000, SMALL, StopRule(target_block_snr=20))
    for bad in corrupt_cases(data):
        with pytest.raises(CorruptionError) as exc:
            decode_signal(bad)
        assert exc.value.offset is not None
        assert "byte offset" in str(exc.value)


def test_bad_magic_offset_zero(rng):
    data = encode_signal(rng.standard_normal(64), 8000, SMALL, StopRule(target_block_snr=10))
    with pytest.raises(CorruptionError) as exc:
        decode_signal(b"WAVE" + data[4:])
    assert exc.value.offset == 0


def test_payload_bit_flips_detected_or_harmless(rng):
    data = encode_signal(rng.standard_normal(64 * 4), 8000, SMALL, StopRule(target_block_snr=30))
    detected = 0
    tail = len(data) - 200
    for pos in range(tail, len(data), 7):
        bad = bytearray(data)
        bad[pos] ^= 0x10
        try:
            decode_signal(bytes(bad))
        except CorruptionError:
            detected += 1
    assert detected > 0


def test_dump_header(rng):
    data = encode_signal(rng.standard_normal(100), 22050, SMALL, StopRule(target_block_snr=10), delta=0.125)
    fields = dict(line.split("=", 1) for line in dump_header(data).splitlines())
    assert fields["magic"] == "GWDC" and fields["version"] == "1"
    assert fields["sample_rate"] == "22050" and fields["length"] == "100" and fields["pad"] == "28"
    assert fields["block_count"] == "2" and float(fields["delta"]) == 0.125
    assert int(fields["file_bytes"]) == len(data)


def test_rate_control_match_snr(rng):
    t = np.arange(64 * 16)
    x = np.sin(0.05 * t) + 0.3 * np.sin(0.31 * t + 1) + 0.01 * rng.standard_normal(t.size)
    res = rate_control_search(x, SMALL, RateTarget(MATCH_SNR, 30.0, 0.5))
    assert res.converged
    out, _ = decode_signal(res.encoding.data)
    assert 30.0 <= snr(x, out) <= 30.5
    assert res.achieved_db == pytest.approx(snr(x, out), abs=1e-9)


def test_rate_control_match_mean_snr(rng):
    x = rng.standard_normal(64 * 8)
    res = rate_control_search(x, SMALL, RateTarget(MATCH_MEAN_SNR, 20.0, 1.0))
    assert res.converged
    out, _ = decode_signal(res.encoding.data)
    assert 20.0 <= block_snr_stats(x, out, 64).mean_snr_db <= 21.0


def test_rate_control_fixed(rng):
    x = rng.standard_normal(64 * 2)
    res = rate_control_search(x, SMALL, RateTarget(FIXED, stop=StopRule(target_block_snr=20), delta=0.01))
    assert res.converged and res.delta == 0.01
    assert res.encoding.data == encode_signal(x, 8000, SMALL, StopRule(target_block_snr=20), delta=0.01)


def test_rate_control_unreachable_target(rng):
    x = rng.standard_normal(32 * 2)
    res = rate_control_search(x, DictionaryConfig(32, 32), RateTarget(MATCH_SNR, 400.0, 0.5))
    assert not res.converged
    assert res.achieved_db < 400


def test_rate_target_validation():
    with pytest.raises(ConfigurationError):
        RateTarget(MATCH_SNR)
    with pytest.raises(ConfigurationError):
        RateTarget(FIXED)
    with pytest.raises(ConfigurationError):
        RateTarget("vbr", 10.0)
