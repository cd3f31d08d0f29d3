"""Command-line front end: ``gwdc encode|decode|metrics|summary|dump-header``.

Exit codes: 0 success, 2 bad input or corrupt data, 3 rate control did not
converge (the output file is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import audio_io, container, metrics
from .dictionary import DictionaryConfig, PrototypeAtom
from .errors import CodecError
from .pursuit import StopRule

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3

WORKERS_ENV = "GWDC_WORKERS"

log = logging.getLogger("gwdc")


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return metrics.format_db(v)
    return str(v)


def _print_report(pairs, out=None):
    out = out or sys.stdout
    for k, v in pairs:
        print(f"{k}={_fmt(v)}", file=out)


def load_prototypes(path) -> tuple[PrototypeAtom, ...]:
    """Read prototypes from JSON: a list of sample lists, or objects with
    ``samples`` and optional ``label``."""
    raw = json.loads(Path(path).read_text())
    if isinstance(raw, dict):
        raw = raw.get("prototypes", [])
    protos = []
    for k, item in enumerate(raw, start=1):
        if isinstance(item, dict):
            protos.append(PrototypeAtom(tuple(item["samples"]), item.get("label", f"p{k}")))
        else:
            protos.append(PrototypeAtom(tuple(item), f"p{k}"))
    return tuple(protos)


def _dict_config(args) -> DictionaryConfig:
    kw = {}
    if args.prototypes:
        kw["prototypes"] = load_prototypes(args.prototypes)
    return DictionaryConfig(block_size=args.block_size, trig_size=args.redundancy * args.block_size, **kw)


def _decoded_as_written(samples, sample_rate, bit_depth):
    """The decoded signal exactly as ``decode`` will store it."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        data = audio_io.write_wav(audio_io.Signal(samples, sample_rate), bit_depth)
    return audio_io.read_wav(data).samples


def cmd_encode(args) -> int:
    src = audio_io.load_wav(args.input)
    cfg = _dict_config(args)
    if args.target_snr is not None:
        target = container.RateTarget(container.MATCH_SNR, args.target_snr, args.tolerance)
    elif args.target_mean_snr is not None:
        target = container.RateTarget(container.MATCH_MEAN_SNR, args.target_mean_snr, args.tolerance)
    else:
        stop = (StopRule(residual_tolerance=args.rho) if args.rho is not None
                else StopRule(target_block_snr=args.rho_db))
        target = container.RateTarget(container.FIXED, stop=stop, delta=args.delta)
    result = container.rate_control_search(src.samples, cfg, target, src.sample_rate, args.workers)
    enc = result.encoding
    Path(args.output).write_bytes(enc.data)

    wav_bytes = os.path.getsize(args.input)
    decoded = _decoded_as_written(enc.reconstruction, src.sample_rate, args.bit_depth)
    pairs = [("mode", target.mode)]
    if np.any(src.samples):
        report = metrics.quality_report(src.samples, decoded, cfg.block_size)
        pairs += [("snr_db", report.snr_db), ("mean_snr_db", report.mean_snr_db), ("std_db", report.std_snr_db)]
    else:
        pairs += [("snr_db", "inf"), ("mean_snr_db", "inf"), ("std_db", "nan")]
    counts = enc.atom_counts
    pairs += [
        ("cr", metrics.compression_ratio(wav_bytes, len(enc.data))),
        ("wav_bytes", wav_bytes),
        ("file_bytes", len(enc.data)),
        ("blocks", len(counts)),
        ("atoms", int(sum(counts))),
        ("atoms_per_block_max", max(counts)),
        ("delta", f"{result.delta:.6e}"),
    ]
    if result.quality_db is not None:
        pairs.append(("block_quality_db", float(result.quality_db)))
    pairs.append(("converged", result.converged))
    _print_report(pairs)
    if not result.converged:
        print(f"warning: target {target.target_db} dB not reached (best {result.achieved_db:.6f})",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_decode(args) -> int:
    data = Path(args.input).read_bytes()
    samples, rate = container.decode_signal(data)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        audio_io.save_wav(args.output, audio_io.Signal(samples, rate), args.bit_depth)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _print_report([("samples", samples.size), ("sample_rate", rate)])
    return EXIT_OK


def cmd_metrics(args) -> int:
    f = audio_io.load_wav(args.original).samples
    g = audio_io.load_wav(args.test).samples
    if f.size != g.size:
        n = min(f.size, g.size)
        log.warning("length mismatch (%d vs %d); comparing first %d samples", f.size, g.size, n)
        f, g = f[:n], g[:n]
    pairs = []
    if args.align:
        al = metrics.align_reference(f, g)
        pairs += [("shift", al.shift), ("scale", al.scale), ("offset", al.offset)]
        g = al.aligned
    report = metrics.quality_report(f, g, args.block_size)
    pairs += [("snr_db", report.snr_db), ("mean_snr_db", report.mean_snr_db), ("std_db", report.std_snr_db)]
    if args.compressed:
        report.cr = metrics.compression_ratio(os.path.getsize(args.original), os.path.getsize(args.compressed))
        pairs.append(("cr", report.cr))
    if args.csv:
        Path(args.csv).write_text(metrics.metrics_csv(report), encoding="utf-8")
    _print_report(pairs)
    return EXIT_OK


def cmd_summary(args) -> int:
    header, qblocks = container.decode_model(Path(args.input).read_bytes())
    points = metrics.sparsity_summary([len(b) for b in qblocks], header.block_size)
    text = metrics.summary_csv(points)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dump_header(args) -> int:
    print(container.dump_header(Path(args.input).read_bytes()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gwdc", description="Sparse dictionary codec for single-channel signals.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="compress a WAV file")
    e.add_argument("input")
    e.add_argument("output")
    goal = e.add_mutually_exclusive_group(required=True)
    goal.add_argument("--target-snr", type=float, help="match this global SNR (dB)")
    goal.add_argument("--target-mean-snr", type=float, help="match this mean block snr (dB)")
    goal.add_argument("--rho-db", type=float, help="fixed per-block quality: ||r_q|| < ||f_q|| 10^(-dB/20)")
    goal.add_argument("--rho", type=float, help="fixed absolute residual tolerance per block")
    e.add_argument("--delta", type=float, help="quantization step (fixed mode)")
    e.add_argument("--tolerance", type=float, default=0.5, help="accepted overshoot of the target (dB)")
    e.add_argument("--block-size", type=int, default=2048)
    e.add_argument("--redundancy", type=int, default=2, help="trig atoms per family / block size")
    e.add_argument("--prototypes", help="JSON file of pulse prototypes")
    e.add_argument("--workers", type=int, default=_default_workers())
    e.add_argument("--bit-depth", type=int, default=32, choices=(16, 24, 32),
                   help="bit depth the report assumes for the decoded WAV")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decompress to WAV")
    d.add_argument("input")
    d.add_argument("output")
    d.add_argument("--bit-depth", type=int, default=32, choices=(16, 24, 32))
    d.set_defaults(func=cmd_decode)

    m = sub.add_parser("metrics", help="compare two WAV files")
    m.add_argument("original")
    m.add_argument("test")
    m.add_argument("--align", action="store_true", help="undo delay, gain and offset of the test signal")
    m.add_argument("--block-size", type=int, default=2048)
    m.add_argument("--csv", help="write per-block snr to this CSV file")
    m.add_argument("--compressed", help="compressed file, to report CR against the original WAV")
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("summary", help="normalized atoms-per-block series of a .gwdc file")
    s.add_argument("input")
    s.add_argument("output", nargs="?")
    s.set_defaults(func=cmd_summary)

    h = sub.add_parser("dump-header", help="print container header fields")
    h.add_argument("input")
    h.set_defaults(func=cmd_dump_header)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (CodecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
