"""Redundant trigonometric + translated-pulse dictionary over block space.

Atoms are addressed by a 1-based global index.  The family order is fixed:
``trig_size`` cosine atoms, then ``trig_size`` sine atoms, then one pulse
family per prototype in the order the prototypes are given.

Inner products against the trigonometric families are evaluated with a
zero-padded DCT-II / DST-II of length ``trig_size``; pulse families use a
sliding dot product.  Results are value-equivalent to multiplying by the
dense atom matrix, which :meth:`Dictionary.matrix` still provides for small
dictionaries and tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.fft

from .errors import ConfigurationError, DimensionError

# rows per chunk when computing trig normalizers
_NORM_CHUNK = 512


@dataclass(frozen=True)
class PrototypeAtom:
    samples: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        samples = tuple(float(s) for s in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise ConfigurationError(f"prototype {self.label!r} has no samples")
        if not any(s != 0.0 for s in samples):
            raise ConfigurationError(f"prototype {self.label!r} is identically zero")
        if not all(np.isfinite(samples)):
            raise ConfigurationError(f"prototype {self.label!r} has non-finite samples")

    @property
    def support(self) -> int:
        return len(self.samples)

    def normalized(self) -> np.ndarray:
        p = np.asarray(self.samples, dtype=np.float64)
        return p / np.linalg.norm(p)


DEFAULT_PROTOTYPES = (
    PrototypeAtom((1.0,), "p1"),
    PrototypeAtom((1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)), "p2"),
    PrototypeAtom((1.0 / np.sqrt(6.0), 2.0 / np.sqrt(6.0), 1.0 / np.sqrt(6.0)), "p3"),
)


@dataclass(frozen=True)
class DictionaryConfig:
    block_size: int = 2048
    trig_size: int = 4096
    prototypes: tuple[PrototypeAtom, ...] = DEFAULT_PROTOTYPES

    def __post_init__(self):
        object.__setattr__(self, "prototypes", tuple(self.prototypes))
        if int(self.block_size) != self.block_size or self.block_size < 2:
            raise ConfigurationError(f"block_size must be an integer >= 2, got {self.block_size}")
        if int(self.trig_size) != self.trig_size or self.trig_size < self.block_size:
            raise ConfigurationError(
                f"trig_size must be an integer >= block_size ({self.block_size}), got {self.trig_size}"
            )
        if not self.prototypes:
            raise ConfigurationError("at least one prototype atom is required")
        for p in self.prototypes:
            if p.support > self.block_size:
                raise ConfigurationError(
                    f"prototype {p.label!r} support {p.support} exceeds block_size {self.block_size}"
                )

    @classmethod
    def standard(cls, block_size: int = 2048, redundancy: int = 2) -> "DictionaryConfig":
        return cls(block_size=block_size, trig_size=redundancy * block_size)


@dataclass(frozen=True)
class Family:
    """Contiguous run of global indices ``first..last`` (inclusive, 1-based)."""

    kind: str  # "cos", "sin" or "pulse"
    label: str
    first: int
    last: int
    prototype: PrototypeAtom | None = None

    @property
    def size(self) -> int:
        return self.last - self.first + 1


def _trig_samples(kind: str, n: np.ndarray, block_size: int, trig_size: int) -> np.ndarray:
    """Unnormalized trig atom samples, one row per entry of the 1-based ``n``."""
    i = np.arange(1, block_size + 1, dtype=np.int64)
    n = np.asarray(n, dtype=np.int64)
    if kind == "cos":
        arg = np.outer(n - 1, 2 * i - 1)
        return np.cos(np.pi * arg / (2 * trig_size))
    arg = np.outer(n, 2 * i - 1)
    return np.sin(np.pi * arg / (2 * trig_size))


def _trig_normalizers(kind: str, block_size: int, trig_size: int) -> np.ndarray:
    out = np.empty(trig_size)
    for start in range(1, trig_size + 1, _NORM_CHUNK):
        n = np.arange(start, min(start + _NORM_CHUNK, trig_size + 1))
        norms = np.linalg.norm(_trig_samples(kind, n, block_size, trig_size), axis=1)
        if np.any(norms == 0):
            raise ConfigurationError(f"degenerate zero {kind} atom for trig_size={trig_size}")
        out[start - 1 : start - 1 + len(n)] = 1.0 / norms
    return out


def build_trig_family(block_size: int, trig_size: int, kind: str) -> np.ndarray:
    """Dense ``(trig_size, block_size)`` matrix of unit-norm cos or sin atoms."""
    if kind not in ("cos", "sin"):
        raise ConfigurationError(f"unknown trig family {kind!r}")
    if block_size < 2 or trig_size < 1:
        raise ConfigurationError(f"invalid sizes block_size={block_size}, trig_size={trig_size}")
    w = _trig_normalizers(kind, block_size, trig_size)
    n = np.arange(1, trig_size + 1)
    return _trig_samples(kind, n, block_size, trig_size) * w[:, None]


def build_pulse_family(prototype: PrototypeAtom, block_size: int) -> np.ndarray:
    """Every fully-interior translation of the normalized prototype, by start position."""
    if prototype.support > block_size:
        raise ConfigurationError(
            f"prototype support {prototype.support} exceeds block_size {block_size}"
        )
    p = prototype.normalized()
    count = block_size - prototype.support + 1
    atoms = np.zeros((count, block_size))
    for s in range(count):
        atoms[s, s : s + prototype.support] = p
    return atoms


class Dictionary:
    """Immutable dictionary built from a :class:`DictionaryConfig`."""

    def __init__(self, config: DictionaryConfig):
        self.config = config
        self.block_size = config.block_size
        self.trig_size = config.trig_size
        self.cos_normalizers = _trig_normalizers("cos", self.block_size, self.trig_size)
        self.sin_normalizers = _trig_normalizers("sin", self.block_size, self.trig_size)
        self._pulses = tuple(p.normalized() for p in config.prototypes)

        m = self.trig_size
        families = [Family("cos", "cos", 1, m), Family("sin", "sin", m + 1, 2 * m)]
        nxt = 2 * m + 1
        for k, proto in enumerate(config.prototypes):
            size = self.block_size - proto.support + 1
            families.append(Family("pulse", proto.label or f"p{k + 1}", nxt, nxt + size - 1, proto))
            nxt += size
        self.families = tuple(families)
        self.total_atoms = nxt - 1
        for arr in (self.cos_normalizers, self.sin_normalizers, *self._pulses):
            arr.setflags(write=False)

    def __repr__(self):
        return (f"Dictionary(block_size={self.block_size}, trig_size={self.trig_size}, "
                f"total_atoms={self.total_atoms})")

    def family_of(self, n: int) -> tuple[int, Family]:
        """Return ``(family_position, family)`` holding global index ``n``."""
        if not 1 <= n <= self.total_atoms:
            raise IndexError(f"atom index {n} outside 1..{self.total_atoms}")
        for k, fam in enumerate(self.families):
            if fam.first <= n <= fam.last:
                return k, fam
        raise AssertionError("families do not cover the index space")

    def atom(self, n: int) -> np.ndarray:
        k, fam = self.family_of(int(n))
        local = int(n) - fam.first + 1
        if fam.kind == "cos":
            return _trig_samples("cos", [local], self.block_size, self.trig_size)[0] * self.cos_normalizers[local - 1]
        if fam.kind == "sin":
            return _trig_samples("sin", [local], self.block_size, self.trig_size)[0] * self.sin_normalizers[local - 1]
        p = self._pulses[k - 2]
        out = np.zeros(self.block_size)
        out[local - 1 : local - 1 + len(p)] = p
        return out

    def atoms(self, indices: Iterable[int]) -> np.ndarray:
        indices = list(indices)
        out = np.empty((len(indices), self.block_size))
        for row, n in enumerate(indices):
            out[row] = self.atom(n)
        return out

    def matrix(self) -> np.ndarray:
        """Dense ``(total_atoms, block_size)`` atom matrix."""
        parts = [
            build_trig_family(self.block_size, self.trig_size, "cos"),
            build_trig_family(self.block_size, self.trig_size, "sin"),
        ]
        parts += [build_pulse_family(p, self.block_size) for p in self.config.prototypes]
        return np.vstack(parts)

    def correlate_all(self, v, excluded: Iterable[int] = ()) -> np.ndarray:
        """Inner products with every atom; entry ``n - 1`` belongs to atom ``n``.

        Excluded atoms are reported as NaN.
        """
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.block_size,):
            raise DimensionError(f"expected vector of length {self.block_size}, got shape {v.shape}")
        m = self.trig_size
        out = np.empty(self.total_atoms)
        padded = np.zeros(m)
        padded[: self.block_size] = v
        out[:m] = 0.5 * scipy.fft.dct(padded, type=2) * self.cos_normalizers
        out[m : 2 * m] = 0.5 * scipy.fft.dst(padded, type=2) * self.sin_normalizers
        for fam, p in zip(self.families[2:], self._pulses):
            out[fam.first - 1 : fam.last] = np.correlate(v, p, mode="valid")
        excluded = list(excluded)
        if excluded:
            out[np.asarray(excluded, dtype=np.int64) - 1] = np.nan
        return out


class MatrixDictionary:
    """Dictionary backed by an explicit atom matrix (rows are atoms).

    Used for small experiments and for restricting the pursuit to a subset of
    a larger dictionary; rows are renormalized to unit norm.
    """

    def __init__(self, atoms):
        atoms = np.array(atoms, dtype=np.float64)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise ConfigurationError("atom matrix must be 2-D and non-empty")
        norms = np.linalg.norm(atoms, axis=1)
        if np.any(norms == 0):
            raise ConfigurationError("atom matrix contains a zero row")
        self._atoms = atoms / norms[:, None]
        self._atoms.setflags(write=False)
        self.total_atoms, self.block_size = self._atoms.shape

    def atom(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.total_atoms:
            raise IndexError(f"atom index {n} outside 1..{self.total_atoms}")
        return self._atoms[n - 1].copy()

    def atoms(self, indices: Sequence[int]) -> np.ndarray:
        return self._atoms[np.asarray(list(indices), dtype=np.int64) - 1]

    def matrix(self) -> np.ndarray:
        return self._atoms.copy()

    def correlate_all(self, v, excluded: Iterable[int] = ()) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.block_size,):
            raise DimensionError(f"expected vector of length {self.block_size}, got shape {v.shape}")
        out = self._atoms @ v
        excluded = list(excluded)
        if excluded:
            out[np.asarray(excluded, dtype=np.int64) - 1] = np.nan
        return out


def build_dictionary(config: DictionaryConfig) -> Dictionary:
    return Dictionary(config)
