"""Uniform magnitude quantization with sign separation and zero pruning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvariantError


@dataclass(frozen=True)
class QuantizerConfig:
    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ConfigurationError(f"delta must be a positive finite number, got {self.delta}")


@dataclass
class QuantizedBlock:
    atom_indices: np.ndarray  # strictly increasing, 1-based
    magnitudes: np.ndarray  # >= 1
    signs: np.ndarray  # 0 = positive, 1 = negative

    def __post_init__(self):
        self.atom_indices = np.asarray(self.atom_indices, dtype=np.int64)
        self.magnitudes = np.asarray(self.magnitudes, dtype=np.int64)
        self.signs = np.asarray(self.signs, dtype=np.uint8)
        n = len(self.atom_indices)
        if len(self.magnitudes) != n or len(self.signs) != n:
            raise InvariantError("indices, magnitudes and signs differ in length")
        if n and (np.any(self.magnitudes < 1) or np.any(np.diff(self.atom_indices) <= 0)
                  or self.atom_indices[0] < 1 or np.any(self.signs > 1)):
            raise InvariantError("quantized block violates its invariants")

    def __len__(self):
        return len(self.atom_indices)

    def __eq__(self, other):
        if not isinstance(other, QuantizedBlock):
            return NotImplemented
        return (np.array_equal(self.atom_indices, other.atom_indices)
                and np.array_equal(self.magnitudes, other.magnitudes)
                and np.array_equal(self.signs, other.signs))

    @classmethod
    def empty(cls) -> "QuantizedBlock":
        return cls([], [], [])


def quantize_magnitudes(coefficients, delta: float) -> np.ndarray:
    """floor(|c| / delta + 1/2), i.e. round half up on the magnitude."""
    QuantizerConfig(delta)
    c = np.abs(np.asarray(coefficients, dtype=np.float64))
    return np.floor(c / delta + 0.5).astype(np.int64)


def quantize_block(decomp, delta: float) -> QuantizedBlock:
    """Quantize a decomposition, prune zero magnitudes, sort by atom index."""
    coeffs = np.asarray(decomp.coefficients, dtype=np.float64)
    indices = np.asarray(decomp.atom_indices, dtype=np.int64)
    mags = quantize_magnitudes(coeffs, delta)
    keep = mags > 0
    indices, mags, coeffs = indices[keep], mags[keep], coeffs[keep]
    order = np.argsort(indices, kind="stable")
    return QuantizedBlock(indices[order], mags[order], (coeffs[order] < 0).astype(np.uint8))


def dequantize_block(qblock: QuantizedBlock, delta: float) -> np.ndarray:
    """Signed coefficients ``(+/-1) * delta * magnitude`` in stored index order."""
    sign = 1.0 - 2.0 * qblock.signs.astype(np.float64)
    return sign * (delta * qblock.magnitudes.astype(np.float64))


def default_delta(decomps) -> float:
    """Largest coefficient magnitude over the signal divided by 2**16."""
    peak = max((max(abs(c) for c in d.coefficients) for d in decomps if d.coefficients), default=0.0)
    return peak / 2 ** 16 if peak > 0 else 1.0
