"""Quality, alignment and compression metrics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import DimensionError, InputError

# zero-error comparisons report this value; text outputs print it as "inf"
LOSSLESS = math.inf

# above this length cross-correlation switches from direct summation to FFT
DIRECT_XCORR_MAX = 1 << 14


def _pair(f, fr):
    f = np.asarray(f, dtype=np.float64)
    fr = np.asarray(fr, dtype=np.float64)
    if f.shape != fr.shape or f.ndim != 1:
        raise DimensionError(f"signals differ in shape: {f.shape} vs {fr.shape}")
    return f, fr


def snr(f, fr) -> float:
    """10 log10(||f||^2 / ||f - fr||^2) in dB; :data:`LOSSLESS` for zero error."""
    f, fr = _pair(f, fr)
    num = float(f @ f)
    if num == 0.0:
        raise InputError("reference signal has zero norm")
    err = f - fr
    den = float(err @ err)
    if den == 0.0:
        return LOSSLESS
    return 10.0 * math.log10(num / den)


def format_db(value: float) -> str:
    return "inf" if value == LOSSLESS else f"{value:.6f}"


@dataclass
class BlockSnrStats:
    block_snr_db: list[float]  # NaN for skipped (zero-norm) blocks
    mean_snr_db: float
    std_snr_db: float
    skipped: list[int] = field(default_factory=list)  # 1-based block numbers

    @property
    def std_defined(self) -> bool:
        return not math.isnan(self.std_snr_db)


def block_snr_stats(f, fr, block_size: int) -> BlockSnrStats:
    """Per-block snr with mean and sample standard deviation (Q - 1 divisor).

    A trailing partial block is compared as if zero padded.  Zero-norm blocks
    are skipped and listed in ``skipped``; fewer than two usable blocks leave
    the standard deviation NaN.
    """
    f, fr = _pair(f, fr)
    if block_size < 1:
        raise InputError("block_size must be positive")
    q = -(-f.size // block_size)
    pad = q * block_size - f.size
    fb = np.concatenate([f, np.zeros(pad)]).reshape(q, block_size)
    eb = np.concatenate([f - fr, np.zeros(pad)]).reshape(q, block_size)
    values, skipped = [], []
    for k in range(q):
        num = float(fb[k] @ fb[k])
        if num == 0.0:
            values.append(math.nan)
            skipped.append(k + 1)
            continue
        den = float(eb[k] @ eb[k])
        values.append(LOSSLESS if den == 0.0 else 10.0 * math.log10(num / den))
    used = np.array([v for v in values if not math.isnan(v)])
    if used.size == 0:
        raise InputError("every block of the reference signal is zero")
    mean = float(used.mean())
    if used.size < 2 or not math.isfinite(mean):
        std = math.nan
    else:
        std = float(np.sqrt(((used - mean) ** 2).sum() / (used.size - 1)))
    return BlockSnrStats(values, mean, std, skipped)


@dataclass
class QualityReport:
    snr_db: float
    block_snr_db: list[float]
    mean_snr_db: float
    std_snr_db: float
    cr: float | None = None


def quality_report(f, fr, block_size: int, cr: float | None = None) -> QualityReport:
    stats = block_snr_stats(f, fr, block_size)
    return QualityReport(snr(f, fr), stats.block_snr_db, stats.mean_snr_db, stats.std_snr_db, cr)


def compression_ratio(original_bytes: int, compressed_bytes: int) -> float:
    if compressed_bytes <= 0 or original_bytes <= 0:
        raise InputError("file sizes must be positive")
    return original_bytes / compressed_bytes


# alignment


def shift_signal(x, tau: int) -> np.ndarray:
    """Delay ``x`` by ``tau`` samples: ``out[n] = x[n - tau]``, zero outside."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    n = x.size
    if tau >= 0:
        if tau < n:
            out[tau:] = x[: n - tau]
    elif -tau < n:
        out[: n + tau] = x[-tau:]
    return out


def cross_correlation(f, g, max_lag: int | None = None, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """``c(tau) = sum_n f(n) g(n + tau)`` for ``tau = -max_lag..max_lag``.

    Returns ``(lags, values)``.  ``method`` is ``"direct"``, ``"fft"`` or
    ``"auto"`` (direct up to :data:`DIRECT_XCORR_MAX` samples).
    """
    f, g = _pair(f, g)
    n = f.size
    if max_lag is None:
        max_lag = n // 2
    if method == "auto":
        method = "direct" if n <= DIRECT_XCORR_MAX else "fft"
    if method == "direct":
        full = np.correlate(g, f, mode="full")
    elif method == "fft":
        full = scipy.signal.correlate(g, f, mode="full", method="fft")
    else:
        raise ValueError(f"unknown method {method!r}")
    # full[k] holds lag k - (n - 1)
    lags = np.arange(-max_lag, max_lag + 1)
    return lags, full[lags + n - 1]


@dataclass
class AlignmentResult:
    """``aligned = scale * g(n + shift) + offset`` best matches the original.

    ``gain`` and ``bias`` express the same fit the other way round, as the
    distortion ``g(n + shift) ~ gain * f(n) + bias`` that was undone.
    """

    shift: int
    scale: float
    offset: float
    aligned: np.ndarray
    scale_defined: bool = True

    @property
    def gain(self) -> float:
        return 1.0 / self.scale

    @property
    def bias(self) -> float:
        return -self.offset / self.scale


def align_reference(f, g, method: str = "auto") -> AlignmentResult:
    """Undo a delay and an affine gain/offset of ``g`` relative to ``f``.

    The delay maximizes the cross-correlation over ``|tau| <= N // 2`` (first
    maximum wins).  Gain and offset are the least-squares fit of ``f`` by
    ``a * g(n + tau) + b`` over the samples where the shifted ``g`` exists.
    """
    f, g = _pair(f, g)
    n = f.size
    lags, values = cross_correlation(f, g, n // 2, method)
    tau = int(lags[int(np.argmax(values))])
    shifted = shift_signal(g, -tau)
    lo, hi = max(0, -tau), min(n, n - tau)
    x, y = shifted[lo:hi], f[lo:hi]
    xm, ym = x.mean(), y.mean()
    var = float(((x - xm) ** 2).sum())
    if var == 0.0:
        return AlignmentResult(tau, math.nan, float(ym), np.full(n, float(ym)), scale_defined=False)
    a = float(((x - xm) * (y - ym)).sum()) / var
    b = float(ym - a * xm)
    return AlignmentResult(tau, a, b, a * shifted + b)


# sparsity summary


def sparsity_summary(decomps, block_size: int) -> list[tuple[float, float]]:
    """``(block_center_sample, k_q / sum k_q)`` per block.

    ``decomps`` may hold decompositions (anything with ``iterations``) or
    plain atom counts.
    """
    counts = np.array([getattr(d, "iterations", d) for d in decomps], dtype=np.float64)
    total = counts.sum()
    if counts.size == 0 or total <= 0:
        raise InputError("sparsity summary needs at least one block with atoms")
    return [((q + 0.5) * block_size, float(k / total)) for q, k in enumerate(counts)]


# CSV reports


def metrics_csv(report: QualityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block_index", "snr_db"])
    for q, v in enumerate(report.block_snr_db, start=1):
        w.writerow([q, "nan" if math.isnan(v) else format_db(v)])
    w.writerow(["global", format_db(report.snr_db)])
    return buf.getvalue()


def summary_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["center_sample", "k_tilde"])
    for center, k in points:
        w.writerow([f"{center:.1f}", repr(float(k))])
    return buf.getvalue()
