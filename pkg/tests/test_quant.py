import numba
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from lowpsim import (
    BlockFloatFormat,
    FixedFormat,
    FloatFormat,
    InvalidInputError,
    QuantSpec,
    RoundingMode,
    Tensor,
    UnsupportedFormatError,
    enumerate_representable,
    quantize,
    quantize_composed,
    quantize_fused,
    quantized_op,
)
from lowpsim import tensor as T
from lowpsim.formats import IDENTITY_FORMAT

from .reference import reference_quantize

MODES = list(RoundingMode)
FORMATS = [
    FixedFormat(8, 4),
    FixedFormat(3, 1),
    FixedFormat(4, 2, symmetric=True),
    FixedFormat(5, 2, saturate=False),
    FixedFormat(4, 0, symmetric=True, saturate=False),
    FixedFormat(16, 149 - 24),
    FloatFormat(5, 2),
    FloatFormat(2, 1),
    FloatFormat(8, 7),
    FloatFormat(1, 0),
    BlockFloatFormat(8),
    BlockFloatFormat(4, dim=0),
    BlockFloatFormat(6, dim=1),
]


def _data(seed, shape=(6, 9)):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape) * np.exp2(rng.integers(-6, 6, shape))
    x.flat[0] = 0.0
    x.flat[1] = -0.0
    return x.astype(np.float32)


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.value)
def test_fused_matches_scalar_reference(fmt, mode):
    x = _data(3)
    spec = QuantSpec(fmt, mode, seed=11, call_counter=2)
    got = quantize_fused(Tensor(x), spec)
    want = reference_quantize(x, fmt, mode, 11, 2)
    assert np.array_equal(got.data, want)


@pytest.mark.parametrize("fmt", [f for f in FORMATS if not isinstance(f, FloatFormat)], ids=str)
@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.value)
def test_fused_and_composed_bit_equal(fmt, mode):
    x = Tensor(_data(4))
    spec = QuantSpec(fmt, mode, seed=5)
    assert quantize_fused(x, spec).bit_equal(quantize_composed(x, spec))


@settings(max_examples=60, deadline=None)
@given(
    x=hnp.arrays(np.float32, hnp.array_shapes(min_dims=1, max_dims=3, max_side=5),
                 elements=st.floats(-2.0**100, 2.0**100, width=32)),
    wl=st.integers(2, 12),
    mode=st.sampled_from(MODES),
    seed=st.integers(0, 2**64 - 1),
)
def test_block_equivalence_property(x, wl, mode, seed):
    for dim in [None, *range(x.ndim)]:
        spec = QuantSpec(BlockFloatFormat(wl, dim), mode, seed)
        t = Tensor(x)
        assert quantize_fused(t, spec).bit_equal(quantize_composed(t, spec))


def test_identity_format_is_bit_copy():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2**32, 50_000, dtype=np.uint64).astype(np.uint32)
    x = bits.view(np.float32)
    # normal numbers and zeros only: the identity format has no subnormals
    x = x[np.isfinite(x) & ((np.abs(x) >= np.finfo(np.float32).tiny) | (x == 0))]
    for mode in MODES:
        out = quantize_fused(Tensor(x), QuantSpec(IDENTITY_FORMAT, mode, seed=1))
        assert np.array_equal(out.bits(), x.view(np.uint32))


def test_examples():
    q = lambda xs, fmt, mode="nearest_even": quantize_fused(Tensor(xs), QuantSpec(fmt, mode)).tolist()
    assert q([0.74, -0.3, 5.0], FixedFormat(3, 1)) == [0.5, -0.5, 1.5]
    assert q([0.7, 3.0], BlockFloatFormat(8)) == [0.6875, 3.0]
    assert q([[0.7, 0.1], [3.0, 0.1]], BlockFloatFormat(8, dim=1)) == [[0.6875, 0.099609375], [3.0, 0.099609375]]
    assert q([0.0, 0.0], BlockFloatFormat(4)) == [0.0, 0.0]
    assert q([1.0, 100.0, 1e-9], FloatFormat(4, 3)) == [1.0, 96.0, 0.0]


def test_block_overflow_raises():
    top = float(np.finfo(np.float32).max)
    # the positive side clamps to k_max * 2**127; only k_min * 2**127 = -2**128 overflows
    assert quantize_fused(Tensor([top]), QuantSpec(BlockFloatFormat(2))).tolist() == [2.0**127]
    with pytest.raises(InvalidInputError):
        quantize_fused(Tensor([-top]), QuantSpec(BlockFloatFormat(2)))


def test_stochastic_determinism_and_counter():
    x = Tensor(_data(7))
    spec = QuantSpec(FixedFormat(6, 2), "stochastic", seed=9)
    a = quantize_fused(x, spec)
    assert a.bit_equal(quantize_fused(x, spec))
    assert spec.call_counter == 0
    quantize(x, spec)
    assert spec.call_counter == 1
    b = quantize_fused(x, spec)
    assert not a.bit_equal(b)
    other = quantize_fused(x, spec.copy(seed=10, call_counter=0))
    assert not a.bit_equal(other)
    near = QuantSpec(FixedFormat(6, 2), "nearest_even")
    quantize(x, near)
    assert near.call_counter == 0


def test_pass_counts():
    x = Tensor(_data(1, (64, 64)))
    for fmt in (FixedFormat(8, 4), BlockFloatFormat(8), FloatFormat(5, 2)):
        with T.count_passes() as c:
            quantize_fused(x, QuantSpec(fmt))
        assert c.passes <= 2
    with T.count_passes() as c:
        quantize_composed(x, QuantSpec(FixedFormat(8, 4)))
    assert c.passes >= 4
    with T.count_passes() as c:
        quantize_composed(x, QuantSpec(BlockFloatFormat(8)))
    assert c.passes >= 6


def test_thread_count_does_not_change_results():
    x = Tensor(np.random.default_rng(2).standard_normal((250, 400)).astype(np.float32))
    prev = numba.get_num_threads()
    outs = []
    try:
        for n in (1, min(4, numba.config.NUMBA_NUM_THREADS)):
            numba.set_num_threads(n)
            outs.append([quantize_fused(x, QuantSpec(f, "stochastic", seed=3)) for f in FORMATS])
    finally:
        numba.set_num_threads(prev)
    assert all(a.bit_equal(b) for a, b in zip(*outs))


def test_composed_rejects_float_formats():
    with pytest.raises(UnsupportedFormatError):
        quantize_composed(Tensor([1.0]), QuantSpec(FloatFormat(5, 2)))


def test_float64_input_rejected():
    with pytest.raises(TypeError):
        quantize_fused(Tensor([1.0], dtype=np.float64), QuantSpec(FixedFormat(8, 4)))


def test_quantized_op():
    rng = np.random.default_rng(0)
    a, b = Tensor(rng.standard_normal((4, 5))), Tensor(rng.standard_normal((5, 3)))
    assert quantized_op(T.matmul, QuantSpec(IDENTITY_FORMAT))(a, b).bit_equal(T.matmul(a, b))
    assert quantized_op(T.relu, QuantSpec(FixedFormat(3, 1)))(Tensor([-1.0, 0.74])).tolist() == [0.0, 0.5]
    fmt = FloatFormat(3, 2)
    grid = set(enumerate_representable(fmt).tolist())
    out = quantized_op(T.matmul, QuantSpec(fmt, "stochastic"))(a, b)
    assert set(out.data.reshape(-1).tolist()) <= grid
    assert quantized_op(T.relu, None)(Tensor([-1.0])).tolist() == [0.0]
