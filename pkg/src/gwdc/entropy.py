"""Symbol streams for the quantized model and an adaptive arithmetic coder.

Three streams describe the model:

* indices: per block the first sorted atom index followed by the gaps to the
  next index, with ``0`` separating consecutive blocks (no trailing separator);
* magnitudes: the quantized magnitudes in the same order;
* signs: ``0`` for positive and ``1`` for negative coefficients.

Each stream is coded on its own with an order-0 adaptive arithmetic coder
using 32-bit integer registers.  The frequency model starts with every count
at one, adds one per coded symbol and halves all counts (rounding up) once the
total exceeds ``max(2**16, 2 * alphabet_size)``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, CorruptionError, InvariantError

_BITS = 32
_TOP = (1 << _BITS) - 1
_HALF = 1 << (_BITS - 1)
_QUARTER = 1 << (_BITS - 2)
_RESCALE_FLOOR = 1 << 16
MAX_ALPHABET = 1 << 24


@dataclass
class SymbolStream:
    symbols: list[int]
    alphabet_size: int

    def __post_init__(self):
        self.symbols = [int(s) for s in self.symbols]
        if self.alphabet_size < 1:
            raise ConfigurationError("alphabet_size must be >= 1")
        if self.symbols and (min(self.symbols) < 0 or max(self.symbols) >= self.alphabet_size):
            raise InvariantError(f"symbol outside alphabet of size {self.alphabet_size}")

    @classmethod
    def fitted(cls, symbols) -> "SymbolStream":
        """Stream whose alphabet is ``1 + max(symbols)``."""
        symbols = [int(s) for s in symbols]
        return cls(symbols, 1 + max(symbols, default=0))

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True)
class CodedStream:
    payload: bytes
    symbol_count: int
    alphabet_size: int


# stream construction


def build_index_stream(blocks) -> SymbolStream:
    out: list[int] = []
    for q, block in enumerate(blocks):
        if q:
            out.append(0)
        idx = [int(i) for i in block.atom_indices]
        if not idx:
            continue
        if idx[0] < 1:
            raise InvariantError(f"block {q + 1}: atom index {idx[0]} < 1")
        out.append(idx[0])
        for prev, cur in zip(idx, idx[1:]):
            if cur <= prev:
                raise InvariantError(f"block {q + 1}: indices not strictly increasing")
            out.append(cur - prev)
    return SymbolStream.fitted(out)


def parse_index_stream(stream, block_count: int) -> list[list[int]]:
    symbols = stream.symbols if isinstance(stream, SymbolStream) else list(stream)
    if block_count < 1:
        raise CorruptionError("block count must be positive")
    separators = sum(1 for s in symbols if s == 0)
    if separators != block_count - 1:
        raise CorruptionError(
            f"index stream has {separators} separators, expected {block_count - 1}"
        )
    blocks: list[list[int]] = [[]]
    for s in symbols:
        if s == 0:
            blocks.append([])
        elif s < 0:
            raise CorruptionError(f"negative symbol {s} in index stream")
        else:
            cur = blocks[-1]
            cur.append(s if not cur else cur[-1] + s)
    return blocks


def build_coeff_stream(blocks) -> SymbolStream:
    return SymbolStream.fitted([int(m) for b in blocks for m in b.magnitudes])


def build_sign_stream(blocks) -> SymbolStream:
    return SymbolStream([int(s) for b in blocks for s in b.signs], 2)


# adaptive frequency model


class _AdaptiveModel:
    """Order-0 counts with a Fenwick tree for cumulative lookups."""

    def __init__(self, alphabet_size: int):
        if not 1 <= alphabet_size <= MAX_ALPHABET:
            raise ConfigurationError(f"alphabet size {alphabet_size} outside 1..{MAX_ALPHABET}")
        self.n = alphabet_size
        self.limit = max(_RESCALE_FLOOR, 2 * alphabet_size)
        self.freq = [1] * alphabet_size
        # all-ones counts: node i covers (i & -i) symbols
        self.tree = [i & -i for i in range(alphabet_size + 1)]
        self.total = alphabet_size
        self._top_bit = 1 << (alphabet_size.bit_length() - 1)

    def _rebuild(self):
        n = self.n
        tree = [0] * (n + 1)
        for i, f in enumerate(self.freq, start=1):
            tree[i] += f
            j = i + (i & -i)
            if j <= n:
                tree[j] += tree[i]
        self.tree = tree
        self.total = sum(self.freq)

    def cumulative(self, s: int) -> int:
        """Sum of counts of symbols ``< s``."""
        tree = self.tree
        acc = 0
        while s > 0:
            acc += tree[s]
            s -= s & -s
        return acc

    def find(self, target: int) -> tuple[int, int]:
        """Symbol ``s`` with ``cumulative(s) <= target < cumulative(s + 1)``."""
        tree, n = self.tree, self.n
        pos, acc = 0, 0
        step = self._top_bit
        while step:
            nxt = pos + step
            if nxt <= n and acc + tree[nxt] <= target:
                pos = nxt
                acc += tree[nxt]
            step >>= 1
        return pos, acc

    def update(self, s: int):
        self.freq[s] += 1
        self.total += 1
        i = s + 1
        tree, n = self.tree, self.n
        while i <= n:
            tree[i] += 1
            i += i & -i
        if self.total > self.limit:
            self.freq = [(f + 1) >> 1 for f in self.freq]
            self._rebuild()


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0

    def put(self, bit: int, repeat: int = 1):
        for _ in range(repeat):
            self.acc = (self.acc << 1) | bit
            self.nbits += 1
            if self.nbits == 8:
                self.out.append(self.acc)
                self.acc = 0
                self.nbits = 0

    def finish(self) -> bytes:
        if self.nbits:
            self.out.append(self.acc << (8 - self.nbits))
            self.acc = self.nbits = 0
        return bytes(self.out)


def arith_encode(stream: SymbolStream) -> CodedStream:
    symbols, alphabet = stream.symbols, stream.alphabet_size
    if not symbols:
        return CodedStream(b"", 0, alphabet)
    model = _AdaptiveModel(alphabet)
    writer = _BitWriter()
    low, high, pending = 0, _TOP, 0
    for s in symbols:
        if not 0 <= s < alphabet:
            raise InvariantError(f"symbol {s} outside alphabet of size {alphabet}")
        span = high - low + 1
        lo = model.cumulative(s)
        hi = lo + model.freq[s]
        total = model.total
        high = low + span * hi // total - 1
        low = low + span * lo // total
        while True:
            if high < _HALF:
                writer.put(0)
                writer.put(1, pending)
                pending = 0
            elif low >= _HALF:
                writer.put(1)
                writer.put(0, pending)
                pending = 0
                low -= _HALF
                high -= _HALF
            elif low >= _QUARTER and high < _HALF + _QUARTER:
                pending += 1
                low -= _QUARTER
                high -= _QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
        model.update(s)
    pending += 1
    if low < _QUARTER:
        writer.put(0)
        writer.put(1, pending)
    else:
        writer.put(1)
        writer.put(0, pending)
    return CodedStream(writer.finish(), len(symbols), alphabet)


def arith_decode(coded: CodedStream) -> SymbolStream:
    """Inverse of :func:`arith_encode`.

    The decoder replays the bits the encoder must have written for the decoded
    symbols and raises :class:`CorruptionError` on any disagreement with the
    payload (including its length and zero padding).  This catches truncation
    and wrong symbol counts or alphabets.
    """
    count, alphabet, payload = coded.symbol_count, coded.alphabet_size, coded.payload
    if count < 0:
        raise CorruptionError("negative symbol count")
    if count == 0:
        if payload:
            raise CorruptionError("non-empty payload for an empty stream")
        return SymbolStream([], max(alphabet, 1))
    model = _AdaptiveModel(alphabet)
    nbits = 8 * len(payload)
    pos = 0

    def bit():
        nonlocal pos
        b = (payload[pos >> 3] >> (7 - (pos & 7))) & 1 if pos < nbits else 0
        pos += 1
        return b

    emitted = 0

    def expect(b, repeat=1):
        nonlocal emitted
        for _ in range(repeat):
            if emitted >= nbits or (payload[emitted >> 3] >> (7 - (emitted & 7))) & 1 != b:
                raise CorruptionError(f"payload disagrees with decoded symbols at bit {emitted}")
            emitted += 1

    value = 0
    for _ in range(_BITS):
        value = (value << 1) | bit()
    low, high, pending = 0, _TOP, 0
    out = []
    for _ in range(count):
        span = high - low + 1
        total = model.total
        target = ((value - low + 1) * total - 1) // span
        if not 0 <= target < total:
            raise CorruptionError("arithmetic decoder left the coding interval")
        s, lo = model.find(target)
        hi = lo + model.freq[s]
        high = low + span * hi // total - 1
        low = low + span * lo // total
        while True:
            if high < _HALF:
                expect(0)
                expect(1, pending)
                pending = 0
            elif low >= _HALF:
                expect(1)
                expect(0, pending)
                pending = 0
                low -= _HALF
                high -= _HALF
                value -= _HALF
            elif low >= _QUARTER and high < _HALF + _QUARTER:
                pending += 1
                low -= _QUARTER
                high -= _QUARTER
                value -= _QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            value = (value << 1) | bit()
        out.append(s)
        model.update(s)
    pending += 1
    if low < _QUARTER:
        expect(0)
        expect(1, pending)
    else:
        expect(1)
        expect(0, pending)
    expected = (emitted + 7) // 8
    if expected != len(payload):
        raise CorruptionError(
            f"payload is {len(payload)} bytes but the decoded symbols account for {expected}"
        )
    while emitted < nbits:
        expect(0)
    return SymbolStream(out, alphabet)


def encode_model(blocks) -> tuple[CodedStream, CodedStream, CodedStream]:
    """Build and code the index, magnitude and sign streams."""
    return (
        arith_encode(build_index_stream(blocks)),
        arith_encode(build_coeff_stream(blocks)),
        arith_encode(build_sign_stream(blocks)),
    )

