"""Reference scalar quantization.

Pure Python, exact: every intermediate is either a Python int or a float64
obtained from a float32 by a power-of-two scaling, so no rounding happens
except the one being simulated.  The tensor kernels are checked against these
functions element by element.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import FormatError, InvalidInputError, TooLargeError
from .formats import (
    BlockFloatFormat,
    FixedFormat,
    FloatFormat,
    NumberFormat,
    RoundingMode,
)

DEFAULT_ENUMERATION_CAP = 2**20
_F32_MAX = float(np.finfo(np.float32).max)


def _finite(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInputError(f"non-finite input {x!r}")
    return x


def _as_f32(x) -> float:
    return float(np.float32(_finite(x)))


def floor_log2(x: float) -> int:
    """floor(log2|x|) for nonzero finite x, computed exactly via frexp."""
    return math.frexp(x)[1] - 1


def round_integer(r: float, mode: RoundingMode, u: float | None = None) -> int:
    """Round a real to an integer.

    Nearest modes differ only at exact midpoints.  The stochastic rule rounds
    up iff ``u`` is below the fractional part, so E[result] = r.
    """
    r = _finite(r)
    mode = RoundingMode.parse(mode)
    f = math.floor(r)
    frac = r - f  # exact
    if mode is RoundingMode.STOCHASTIC:
        if u is None:
            raise ValueError("stochastic rounding needs a uniform variate u")
        return f + 1 if u < frac else f
    if frac > 0.5:
        return f + 1
    if frac < 0.5:
        return f
    if mode is RoundingMode.NEAREST_EVEN:
        return f if f % 2 == 0 else f + 1
    if mode is RoundingMode.NEAREST_AWAY:
        return f + 1 if r > 0 else f
    return f if r > 0 else f + 1


def quantize_scalar_fixed(x, fmt: FixedFormat, mode: RoundingMode, u: float | None = None) -> float:
    x = _as_f32(x)
    k = round_integer(math.ldexp(x, fmt.fl), mode, u)
    if fmt.saturate:
        k = min(max(k, fmt.k_min), fmt.k_max)
    else:
        half = 2 ** (fmt.wl - 1)
        k = (k + half) % (2 * half) - half
        k = max(k, fmt.k_min)
    return math.ldexp(float(k), -fmt.fl)


def quantize_scalar_float(x, fmt: FloatFormat, mode: RoundingMode, u: float | None = None) -> float:
    x = _as_f32(x)
    if x == 0.0:
        return x
    e = floor_log2(x)
    top = fmt.max_value
    if e > fmt.e_max:
        return math.copysign(top, x)
    if e < fmt.e_min:
        # no subnormals: the only candidates are 0 and +-2**e_min
        k = round_integer(math.ldexp(x, -fmt.e_min), mode, u)
        q = math.ldexp(float(k), fmt.e_min)
    else:
        k = round_integer(math.ldexp(x, fmt.man_bits - e), mode, u)
        q = math.ldexp(float(k), e - fmt.man_bits)
    if abs(q) > top:
        q = math.copysign(top, x)
    if q == 0.0:
        q = math.copysign(0.0, x)
    return q


def quantize_scalar_block(
    xs: Sequence[float],
    fmt: BlockFloatFormat,
    mode: RoundingMode,
    us: Sequence[float] | None = None,
) -> list[float]:
    """Quantize one block sharing a single exponent."""
    xs = [_as_f32(x) for x in xs]
    if not xs:
        raise InvalidInputError("empty block")
    if us is None:
        us = [None] * len(xs)
    peak = max(abs(x) for x in xs)
    if peak == 0.0:
        return [0.0] * len(xs)
    s = fmt.step_exponent(floor_log2(peak))
    out = []
    for x, u in zip(xs, us):
        k = round_integer(math.ldexp(x, -s), mode, u)
        k = min(max(k, fmt.k_min), fmt.k_max)
        q = math.ldexp(float(k), s)
        if abs(q) > _F32_MAX:
            raise InvalidInputError(f"block value {x!r} overflows single precision after rounding")
        out.append(q)
    return out


def quantize_scalar(x, fmt: NumberFormat, mode: RoundingMode, u: float | None = None, *, block_exponent=None):
    """Dispatch on format.  Block formats need the block's shared exponent."""
    if isinstance(fmt, FixedFormat):
        return quantize_scalar_fixed(x, fmt, mode, u)
    if isinstance(fmt, FloatFormat):
        return quantize_scalar_float(x, fmt, mode, u)
    if block_exponent is None:
        raise FormatError("block quantization of a single value needs block_exponent")
    x = _as_f32(x)
    s = fmt.step_exponent(block_exponent)
    k = round_integer(math.ldexp(x, -s), mode, u)
    return math.ldexp(float(min(max(k, fmt.k_min), fmt.k_max)), s)


def representable_count(fmt: NumberFormat) -> int:
    if isinstance(fmt, FixedFormat):
        return fmt.k_max - fmt.k_min + 1
    if isinstance(fmt, FloatFormat):
        return 1 + 2 * (fmt.e_max - fmt.e_min + 1) * 2**fmt.man_bits
    return 2**fmt.wl


def enumerate_representable(
    fmt: NumberFormat,
    block_exponent: int | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> np.ndarray:
    """All exactly representable values, sorted ascending, as float64."""
    if isinstance(fmt, BlockFloatFormat) and block_exponent is None:
        raise FormatError("enumerating a block format needs block_exponent")
    if not isinstance(fmt, BlockFloatFormat) and block_exponent is not None:
        raise FormatError("block_exponent only applies to block formats")
    n = representable_count(fmt)
    if n > cap:
        raise TooLargeError(f"{fmt} has {n} representable values, above the cap of {cap}")
    if isinstance(fmt, FixedFormat):
        return np.arange(fmt.k_min, fmt.k_max + 1, dtype=np.float64) * fmt.step
    if isinstance(fmt, BlockFloatFormat):
        return np.arange(fmt.k_min, fmt.k_max + 1, dtype=np.float64) * 2.0 ** fmt.step_exponent(block_exponent)
    sig = 1.0 + np.arange(2**fmt.man_bits, dtype=np.float64) / 2**fmt.man_bits
    pos = np.concatenate([sig * 2.0**e for e in range(fmt.e_min, fmt.e_max + 1)])
    return np.concatenate([-pos[::-1], [0.0], pos])
