"""Block partitioning and Optimized Orthogonal Matching Pursuit (OOMP).

Each block is approximated independently.  At every iteration the selected
atom is the one whose inclusion minimizes the norm of the new residual,
which reduces to maximizing

    |<d_n, r>|^2 / (1 - sum_i |<d_n, w~_i>|^2)

over atoms not yet selected, where ``w~_i`` are the normalized
Gram-Schmidt vectors of the selected atoms.  Both the numerator and the
denominator are kept as per-atom caches and updated with one dictionary
correlation per iteration.  Coefficients come from the biorthogonal set
``b_n`` (``<b_m, d_l_n> = delta_mn``), so ``c(n) = <b_n, f>`` is the
least-squares solution on the selected support.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, CorruptionError, DimensionError, InputError

# atoms whose normalized distance to the selected span falls below this
# are treated as already inside it
DENOMINATOR_EPS = 1e-10
# scores this close (relative) to the best are ties, resolved to the smallest index
TIE_RTOL = 1e-10


@dataclass
class Block:
    index: int
    samples: np.ndarray


def partition_signal(signal, block_size: int) -> tuple[list[Block], int]:
    """Split ``signal`` into zero-padded blocks; returns ``(blocks, pad_length)``."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size == 0:
        raise InputError("signal must be a non-empty 1-D array")
    if block_size < 1:
        raise ConfigurationError(f"block_size must be positive, got {block_size}")
    q = -(-signal.size // block_size)
    pad = q * block_size - signal.size
    padded = np.concatenate([signal, np.zeros(pad)]) if pad else signal.copy()
    blocks = [Block(k + 1, padded[k * block_size : (k + 1) * block_size].copy()) for k in range(q)]
    return blocks, pad


def assemble_signal(blocks, pad_length: int) -> np.ndarray:
    """Concatenate block vectors and drop the trailing ``pad_length`` samples."""
    arrays = [np.asarray(b.samples if isinstance(b, Block) else b, dtype=np.float64) for b in blocks]
    if not arrays:
        raise DimensionError("no blocks to assemble")
    size = arrays[0].shape
    if any(a.shape != size or a.ndim != 1 for a in arrays):
        raise DimensionError("blocks have inconsistent lengths")
    total = len(arrays) * size[0]
    if not 0 <= pad_length < max(size[0], 1) or pad_length >= total:
        raise DimensionError(f"pad_length {pad_length} invalid for block length {size[0]}")
    out = np.concatenate(arrays)
    return out[: total - pad_length]


@dataclass(frozen=True)
class StopRule:
    """Stop when ``||r|| < residual_tolerance`` or when the block SNR reaches
    ``target_block_snr`` dB; never select more than ``max_atoms`` atoms."""

    residual_tolerance: float | None = None
    target_block_snr: float | None = None
    max_atoms: int | None = None

    def __post_init__(self):
        if (self.residual_tolerance is None) == (self.target_block_snr is None):
            raise ConfigurationError("exactly one of residual_tolerance / target_block_snr must be set")
        if self.residual_tolerance is not None and not self.residual_tolerance >= 0:
            raise ConfigurationError("residual_tolerance must be non-negative")
        if self.max_atoms is not None and self.max_atoms < 0:
            raise ConfigurationError("max_atoms must be non-negative")

    def tolerance_for(self, block_norm: float) -> float:
        if self.residual_tolerance is not None:
            return self.residual_tolerance
        return block_norm * 10.0 ** (-self.target_block_snr / 20.0)

    def cap(self, block_size: int) -> int:
        cap = block_size if self.max_atoms is None else self.max_atoms
        if cap > block_size:
            raise ConfigurationError(f"max_atoms {cap} exceeds block_size {block_size}")
        return cap


@dataclass
class AtomicDecomposition:
    block_index: int
    atom_indices: list[int]
    coefficients: list[float]

    @property
    def iterations(self) -> int:
        return len(self.atom_indices)


class _Rows:
    """Growable stack of block-length row vectors."""

    def __init__(self, width: int, capacity: int = 32):
        self.data = np.empty((capacity, width))
        self.count = 0

    def append(self, row: np.ndarray):
        if self.count == self.data.shape[0]:
            grown = np.empty((2 * self.data.shape[0], self.data.shape[1]))
            grown[: self.count] = self.data[: self.count]
            self.data = grown
        self.data[self.count] = row
        self.count += 1

    @property
    def view(self) -> np.ndarray:
        return self.data[: self.count]


@dataclass
class PursuitState:
    block: np.ndarray
    residual: np.ndarray
    corr_cache: np.ndarray  # <d_n, r> for every atom
    denom_cache: np.ndarray  # sum_i |<d_n, w~_i>|^2 for every atom
    selected: list[int] = field(default_factory=list)
    w_unit: _Rows | None = None  # normalized w_i
    b_vectors: _Rows | None = None
    residual_norms: list[float] = field(default_factory=list)

    @property
    def w_vectors(self) -> np.ndarray:
        return self.w_unit.view

    @property
    def biorthogonal(self) -> np.ndarray:
        return self.b_vectors.view

    def coefficients(self) -> np.ndarray:
        return self.b_vectors.view @ self.block


def init_state(block, dictionary) -> PursuitState:
    f = np.asarray(block.samples if isinstance(block, Block) else block, dtype=np.float64)
    if f.shape != (dictionary.block_size,):
        raise DimensionError(f"block length {f.shape} does not match dictionary block_size {dictionary.block_size}")
    return PursuitState(
        block=f,
        residual=f.copy(),
        corr_cache=dictionary.correlate_all(f),
        denom_cache=np.zeros(dictionary.total_atoms),
        w_unit=_Rows(f.size),
        b_vectors=_Rows(f.size),
        residual_norms=[float(np.linalg.norm(f))],
    )


def selection_scores(state: PursuitState) -> np.ndarray:
    """Selection criterion per atom; inadmissible atoms score ``-inf``."""
    gap = 1.0 - state.denom_cache
    admissible = gap >= DENOMINATOR_EPS
    if state.selected:
        admissible[np.asarray(state.selected) - 1] = False
    scores = np.full(gap.shape, -np.inf)
    scores[admissible] = state.corr_cache[admissible] ** 2 / gap[admissible]
    return scores


def select_next_atom(state: PursuitState, dictionary=None) -> int | None:
    """1-based index of the next atom, or ``None`` when no atom is admissible.

    Ties go to the smallest index.  Scores within ``TIE_RTOL`` of the best
    count as ties, since distinct atoms can complete the same subspace and
    then differ only by rounding.  With nothing selected yet the denominator
    is 1 and this is plain maximal correlation.
    """
    scores = selection_scores(state)
    top = scores.max()
    if top == -np.inf:
        return None
    return int(np.argmax(scores >= top * (1 - TIE_RTOL))) + 1


def add_atom(state: PursuitState, dictionary, n: int) -> None:
    """Append atom ``n``: orthogonalize, update the biorthogonal set, residual and caches."""
    d = dictionary.atom(n)
    w = d.copy()
    if state.selected:
        wu = state.w_unit.view
        w -= wu.T @ (wu @ d)
        # one re-orthogonalization pass
        w -= wu.T @ (wu @ w)
    w_norm2 = float(w @ w)
    if w_norm2 <= 0.0:
        raise InputError(f"atom {n} lies in the span of the selected atoms")
    b_new = w / w_norm2
    if state.selected:
        bv = state.b_vectors.view
        bv -= np.outer(bv @ d, b_new)
    state.b_vectors.append(b_new)

    w_unit = w / math.sqrt(w_norm2)
    state.w_unit.append(w_unit)
    proj = float(w @ state.block)
    state.residual -= proj * b_new
    state.selected.append(int(n))

    corr_w = dictionary.correlate_all(w_unit)
    state.corr_cache -= (proj / math.sqrt(w_norm2)) * corr_w
    state.denom_cache += corr_w ** 2
    state.residual_norms.append(float(np.linalg.norm(state.residual)))


def oomp_approximate(
    block,
    dictionary,
    stop: StopRule,
    on_step: Callable[[PursuitState], None] | None = None,
) -> AtomicDecomposition:
    """Approximate one block by OOMP until the stopping rule is met.

    ``on_step`` is called with the live state after every added atom.
    """
    f = np.asarray(block.samples if isinstance(block, Block) else block, dtype=np.float64)
    rho = stop.tolerance_for(float(np.linalg.norm(f)))
    return oomp_path(block, dictionary, [rho], stop.cap(dictionary.block_size), on_step)[0]


def oomp_path(block, dictionary, tolerances, max_atoms: int | None = None, on_step=None):
    """One pursuit run, snapshotted at several residual tolerances.

    Returns one decomposition per tolerance, each identical to what a
    separate run stopped at that tolerance would produce.
    """
    index = block.index if isinstance(block, Block) else 0
    state = init_state(block, dictionary)
    cap = dictionary.block_size if max_atoms is None else max_atoms
    if cap > dictionary.block_size:
        raise ConfigurationError(f"max_atoms {cap} exceeds block_size {dictionary.block_size}")
    order = sorted(range(len(tolerances)), key=lambda j: -tolerances[j])
    out: list[AtomicDecomposition | None] = [None] * len(tolerances)
    if state.residual_norms[0] == 0.0:
        return [AtomicDecomposition(index, [], []) for _ in tolerances]
    pending = list(order)
    while pending:
        r_norm = state.residual_norms[-1]
        exhausted = len(state.selected) >= cap
        n = None if exhausted else select_next_atom(state, dictionary)
        while pending and (r_norm < tolerances[pending[0]] or n is None):
            snap = AtomicDecomposition(index, list(state.selected), state.coefficients().tolist())
            out[pending.pop(0)] = snap
        if not pending or n is None:
            break
        add_atom(state, dictionary, n)
        if on_step is not None:
            on_step(state)
    return out


def reconstruct_block(decomp: AtomicDecomposition, dictionary) -> np.ndarray:
    """Sum of ``c(n) * d_l_n`` over the decomposition, accumulated in list order."""
    out = np.zeros(dictionary.block_size)
    for n, c in zip(decomp.atom_indices, decomp.coefficients):
        if not 1 <= n <= dictionary.total_atoms:
            raise CorruptionError(f"atom index {n} outside 1..{dictionary.total_atoms}")
        out += c * dictionary.atom(n)
    return out


def approximate_blocks(blocks, dictionary, stop: StopRule | Callable[[Block], StopRule], workers: int = 1):
    """Run OOMP over every block, optionally in a thread pool.

    ``stop`` may be a single rule or a callable giving the rule per block.
    Output order always follows the input block order.
    """
    rule_for = stop if callable(stop) else (lambda _b: stop)

    def run(b):
        return oomp_approximate(b, dictionary, rule_for(b))

    if workers <= 1 or len(blocks) <= 1:
        return [run(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, blocks))
