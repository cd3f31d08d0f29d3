import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwdc.errors import ConfigurationError, InvariantError
from gwdc.pursuit import AtomicDecomposition
from gwdc.quantizer import (
    QuantizedBlock,
    default_delta,
    dequantize_block,
    quantize_block,
    quantize_magnitudes,
)


def test_hand_computed_example():
    q = quantize_block(AtomicDecomposition(1, [9, 4, 2], [1.3, -0.2, 0.76]), 0.5)
    assert q.atom_indices.tolist() == [2, 9]
    assert q.magnitudes.tolist() == [2, 3]
    assert q.signs.tolist() == [0, 0]


def test_empty():
    q = quantize_block(AtomicDecomposition(1, [], []), 0.1)
    assert len(q) == 0
    assert dequantize_block(q, 0.1).size == 0


def test_signs_follow_sorted_order():
    q = quantize_block(AtomicDecomposition(1, [30, 10, 20], [-1.0, 2.0, -3.0]), 1.0)
    assert q.atom_indices.tolist() == [10, 20, 30]
    assert q.magnitudes.tolist() == [2, 3, 1]
    assert q.signs.tolist() == [0, 1, 1]


def test_dequantize_example():
    q = QuantizedBlock([1, 5], [2, 3], [0, 1])
    assert dequantize_block(q, 0.5).tolist() == [1.0, -1.5]


def test_half_rounds_up():
    assert quantize_magnitudes([0.25, 0.75, 1.25], 0.5).tolist() == [1, 2, 3]


def test_bad_delta():
    with pytest.raises(ConfigurationError):
        quantize_block(AtomicDecomposition(1, [1], [1.0]), 0.0)
    with pytest.raises(ConfigurationError):
        quantize_block(AtomicDecomposition(1, [1], [1.0]), -1.0)


def test_block_invariants():
    with pytest.raises(InvariantError):
        QuantizedBlock([3, 2], [1, 1], [0, 0])
    with pytest.raises(InvariantError):
        QuantizedBlock([1, 2], [0, 1], [0, 0])
    with pytest.raises(InvariantError):
        QuantizedBlock([1], [1, 2], [0])


def test_error_bound_random(rng):
    c = rng.uniform(-5, 5, 5000)
    delta = 0.01
    q = quantize_block(AtomicDecomposition(1, list(range(1, 5001)), c.tolist()), delta)
    surviving = np.abs(c[q.atom_indices - 1])
    assert np.all(np.abs(delta * q.magnitudes - surviving) <= delta / 2 + 1e-15)


def test_pruned_entries_below_half_step(rng):
    c = rng.uniform(-0.1, 0.1, 2000)
    delta = 0.05
    q = quantize_block(AtomicDecomposition(1, list(range(1, 2001)), c.tolist()), delta)
    pruned = np.setdiff1d(np.arange(1, 2001), q.atom_indices)
    assert np.all(np.abs(c[pruned - 1]) < delta / 2)
    assert np.all(np.abs(c[q.atom_indices - 1]) >= delta / 2)


@given(st.lists(st.tuples(st.integers(1, 10 ** 6), st.floats(-1e3, 1e3, allow_nan=False)),
                max_size=60, unique_by=lambda t: t[0]),
       st.sampled_from([1e-4, 1e-2, 0.5, 3.0]))
def test_requantize_fixed_point(pairs, delta):
    idx = [p[0] for p in pairs]
    c = [p[1] for p in pairs]
    q = quantize_block(AtomicDecomposition(1, idx, c), delta)
    again = quantize_block(AtomicDecomposition(1, q.atom_indices.tolist(), dequantize_block(q, delta).tolist()),
                           delta)
    assert again == q
    assert np.all(np.diff(q.atom_indices) > 0)


def test_default_delta():
    decs = [AtomicDecomposition(1, [1], [2.0]), AtomicDecomposition(2, [3, 4], [-8.0, 1.0])]
    assert default_delta(decs) == 8.0 / 2 ** 16
