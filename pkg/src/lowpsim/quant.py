"""Tensor quantization: fused single-pass kernels and a composed baseline.

``quantize_fused`` runs one compiled kernel over the data (plus a reduction
pass for block maxima).  ``quantize_composed`` reaches the same bit-exact
result by chaining generic tensor operations, each a separate pass with its
own temporary.  It exists to measure what fusion buys.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from . import tensor as T
from .errors import InvalidInputError, UnsupportedFormatError
from .formats import BlockFloatFormat, FixedFormat, FloatFormat, NumberFormat, RoundingMode
from .rng import MASK64, call_key
from .tensor import Tensor


@dataclass
class QuantSpec:
    """Format, rounding mode and the RNG position for stochastic rounding.

    ``call_counter`` selects the variate stream of the next quantization.
    :func:`quantize` advances it after each stochastic use; the kernels
    themselves never mutate it.
    """

    format: NumberFormat
    mode: RoundingMode = RoundingMode.NEAREST_EVEN
    seed: int = 0
    call_counter: int = 0

    def __post_init__(self):
        self.mode = RoundingMode.parse(self.mode)
        self.seed &= MASK64

    def key(self) -> np.uint64:
        return np.uint64(call_key(self.seed, self.call_counter))

    def advance(self) -> None:
        if self.mode.is_stochastic:
            self.call_counter += 1

    def copy(self, **changes) -> QuantSpec:
        c = copy.copy(self)
        for k, v in changes.items():
            setattr(c, k, v)
        return c


def _block_layout(shape: tuple[int, ...], dim: int | None) -> tuple[int, int]:
    """(inner stride, number of blocks) mapping a flat index to its block."""
    if dim is None:
        return 1, 1
    T._check_dim(dim, len(shape))
    inner = 1
    for s in shape[dim + 1 :]:
        inner *= s
    return max(inner, 1), max(shape[dim], 1)


def quantize_fused(t: Tensor, spec: QuantSpec) -> Tensor:
    """Quantize every element in one compiled pass.

    Relies on the tensor's finiteness invariant; the variate for flat element
    ``i`` is ``uniform_variate(spec.seed, spec.call_counter, i)``.
    """
    fmt, mode = spec.format, spec.mode
    if t.dtype != T.FLOAT32:
        raise TypeError("quantization input must be float32")
    x = t.data.reshape(-1)
    bits = x.view(np.uint32)
    out = np.empty_like(x)
    key = spec.key()
    code = mode.code
    if isinstance(fmt, FixedFormat):
        _kernels.fixed_kernel(x, out, fmt.fl, float(fmt.k_min), float(fmt.k_max), fmt.saturate, fmt.wl, code, key)
    elif isinstance(fmt, FloatFormat):
        _kernels.float_kernel(x, bits, out, fmt.man_bits, fmt.e_min, fmt.e_max, fmt.max_value, code, key)
    elif isinstance(fmt, BlockFloatFormat):
        inner, nblocks = _block_layout(t.shape, fmt.dim)
        peak = _kernels.block_maxima(bits, inner, nblocks)
        T.record_pass("block_maxima")
        _kernels.block_kernel(x, out, peak, inner, nblocks, fmt.wl, code, key)
        if (peak >= _kernels.TOP_BINADE_BITS).any():
            _check_overflow(out)
    else:
        raise TypeError(f"not a number format: {fmt!r}")
    T.record_pass("quantize_fused")
    return Tensor._wrap(out.reshape(t.shape), check=False)


def _check_overflow(out: np.ndarray) -> None:
    if not np.isfinite(out).all():
        raise InvalidInputError("block quantization overflows single precision")


def _round(r: Tensor, spec: QuantSpec) -> Tensor:
    if spec.mode.is_stochastic:
        return T.round_stochastic(r, T.uniform(r.shape, spec.seed, spec.call_counter))
    return T.round_nearest(r, spec.mode)


def quantize_composed(t: Tensor, spec: QuantSpec) -> Tensor:
    """Same semantics as :func:`quantize_fused`, built from generic tensor ops.

    Intermediates are float64 so that scaling by the step is exact even for
    inputs near the edges of float32 range.  Floating-point formats are not
    supported: they need per-element exponent manipulation that has no
    generic-op equivalent here.
    """
    fmt = spec.format
    if isinstance(fmt, FloatFormat):
        raise UnsupportedFormatError("the composed baseline cannot simulate floating-point formats")
    if t.dtype != T.FLOAT32:
        raise TypeError("quantization input must be float32")
    w = T.widen(t)
    if isinstance(fmt, FixedFormat):
        k = _round(T.scale(w, 2.0**fmt.fl), spec)
        if fmt.saturate:
            k = T.clamp(k, fmt.k_min, fmt.k_max)
        else:
            half = 2.0 ** (fmt.wl - 1)
            k = T.wrap(k, -half, 2 * half)
            if fmt.symmetric:
                k = T.clamp(k, fmt.k_min, fmt.k_max)
        return T.narrow(T.scale(k, fmt.step))
    if isinstance(fmt, BlockFloatFormat):
        peak = T.reduce_max_abs(w, fmt.dim)
        step = T.exp2(T.add_scalar(T.exponent(peak), -(fmt.wl - 2)))
        step = T.expand_along(step, t.shape, fmt.dim)
        k = T.clamp(_round(T.div(w, step), spec), fmt.k_min, fmt.k_max)
        return T.narrow(T.mul(k, step))
    raise TypeError(f"not a number format: {fmt!r}")


def quantize(t: Tensor, spec: QuantSpec | None) -> Tensor:
    """Fused quantization that advances the spec's counter.  ``None`` is a no-op."""
    if spec is None:
        return t
    out = quantize_fused(t, spec)
    spec.advance()
    return out


def quantized_op(op: Callable[..., Tensor], spec: QuantSpec | None) -> Callable[..., Tensor]:
    """Append quantization to a full-precision op; the op's internals stay unquantized."""

    def run(*args, **kwargs) -> Tensor:
        return quantize(op(*args, **kwargs), spec)

    run.__name__ = f"quantized_{getattr(op, '__name__', 'op')}"
    return run
