"""Compiled single-pass kernels (numba).

Each quantization kernel reads float32 input once and writes float32 output
once; the block kernel adds one reduction pass for the per-block maxima.
Arithmetic is float64 with power-of-two scale factors from a lookup table, so
every intermediate is exact.  Stochastic variates are generated inline from
the same counter hash as ``lowpsim.rng``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from numba import njit, prange, uint32, uint64

from .rng import GOLDEN, MUL1, MUL2

warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

POW2_OFFSET = 400
POW2 = np.ldexp(1.0, np.arange(-POW2_OFFSET, POW2_OFFSET + 1)).astype(np.float64)

_GOLDEN = uint64(GOLDEN)
_MUL1 = uint64(MUL1)
_MUL2 = uint64(MUL2)
_S11 = uint64(11)
_S27 = uint64(27)
_S30 = uint64(30)
_S31 = uint64(31)
_INV_2_53 = 2.0**-53
_ABS_MASK = uint32(0x7FFFFFFF)
_EXP_MASK = uint32(0x7F800000)
# |x| >= 2**127: the only binade where rounding to -2**(wl-1) steps can overflow
TOP_BINADE_BITS = np.uint32(0x7F000000)

STOCHASTIC, NEAREST_EVEN, NEAREST_AWAY, NEAREST_ZERO = 0, 1, 2, 3


@njit(inline="always", cache=True)
def _mix64(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(inline="always", cache=True)
def _variate(key, i):
    h = _mix64(key ^ uint64(i))
    return float(h >> _S11) * _INV_2_53


@njit(inline="always", cache=True)
def _round(r, mode, u):
    if mode == NEAREST_EVEN:
        return np.rint(r)
    f = np.floor(r)
    d = r - f
    if mode == STOCHASTIC:
        up = u < d
    elif mode == NEAREST_AWAY:
        up = (d > 0.5) | ((d == 0.5) & (r > 0.0))
    else:
        up = (d > 0.5) | ((d == 0.5) & (r < 0.0))
    return f + 1.0 if up else f


@njit(inline="always", cache=True)
def _floor_log2_bits(b):
    """floor(log2|x|) from the bit pattern of a nonzero finite float32."""
    b = b & _ABS_MASK
    field = int(b >> uint32(23))
    if field != 0:
        return field - 127
    m = b & uint32(0x7FFFFF)
    n = -150
    while m != 0:
        m = m >> uint32(1)
        n += 1
    return n


@njit(inline="always", cache=True)
def _fixed_one(xi, up, down, kmin, kmax, saturate, half, mode, u):
    k = _round(xi * up, mode, u)
    if saturate:
        k = min(max(k, kmin), kmax)
    else:
        k = k + half
        k = max(k - 2.0 * half * np.floor(k / (2.0 * half)) - half, kmin)
    return k * down + 0.0


@njit(parallel=True, cache=True)
def fixed_kernel(x, out, fl, kmin, kmax, saturate, wl, mode, key):
    up = POW2[POW2_OFFSET + fl]
    down = POW2[POW2_OFFSET - fl]
    half = float(2 ** (wl - 1))
    # one loop per mode so the rounding rule is a compile-time constant
    if mode == STOCHASTIC:
        for i in prange(x.size):
            u = _variate(key, i)
            out[i] = _fixed_one(np.float64(x[i]), up, down, kmin, kmax, saturate, half, STOCHASTIC, u)
    elif mode == NEAREST_EVEN:
        for i in prange(x.size):
            out[i] = _fixed_one(np.float64(x[i]), up, down, kmin, kmax, saturate, half, NEAREST_EVEN, 0.0)
    elif mode == NEAREST_AWAY:
        for i in prange(x.size):
            out[i] = _fixed_one(np.float64(x[i]), up, down, kmin, kmax, saturate, half, NEAREST_AWAY, 0.0)
    else:
        for i in prange(x.size):
            out[i] = _fixed_one(np.float64(x[i]), up, down, kmin, kmax, saturate, half, NEAREST_ZERO, 0.0)


@njit(inline="always", cache=True)
def _float_one(xf, b, man, emin, emax, top, mode, u):
    xi = np.float64(xf)
    if xi == 0.0:
        return xi
    e = _floor_log2_bits(b)
    if e > emax:
        return math.copysign(top, xi)
    if e < emin:
        q = _round(xi * POW2[POW2_OFFSET - emin], mode, u) * POW2[POW2_OFFSET + emin]
    else:
        q = _round(xi * POW2[POW2_OFFSET + man - e], mode, u) * POW2[POW2_OFFSET + e - man]
    if abs(q) > top:
        q = top
    return math.copysign(q, xi)


@njit(parallel=True, cache=True)
def float_kernel(x, bits, out, man, emin, emax, top, mode, key):
    if mode == STOCHASTIC:
        for i in prange(x.size):
            u = _variate(key, i)
            out[i] = _float_one(x[i], bits[i], man, emin, emax, top, STOCHASTIC, u)
    elif mode == NEAREST_EVEN:
        for i in prange(x.size):
            out[i] = _float_one(x[i], bits[i], man, emin, emax, top, NEAREST_EVEN, 0.0)
    elif mode == NEAREST_AWAY:
        for i in prange(x.size):
            out[i] = _float_one(x[i], bits[i], man, emin, emax, top, NEAREST_AWAY, 0.0)
    else:
        for i in prange(x.size):
            out[i] = _float_one(x[i], bits[i], man, emin, emax, top, NEAREST_ZERO, 0.0)


@njit(cache=True)
def block_maxima(bits, inner, nblocks):
    """Pass 1: per-block max of |x| as float32 bit patterns (order-preserving)."""
    peak = np.zeros(nblocks, dtype=np.uint32)
    if nblocks == 1:
        m = uint32(0)
        for i in range(bits.size):
            m = max(m, bits[i] & _ABS_MASK)
        peak[0] = m
        return peak
    for i in range(bits.size):
        a = bits[i] & _ABS_MASK
        blk = (i // inner) % nblocks
        if a > peak[blk]:
            peak[blk] = a
    return peak


@njit(inline="always", cache=True)
def _block_one(xi, s, kmin, kmax, mode, u):
    k = min(max(_round(xi * POW2[POW2_OFFSET - s], mode, u), kmin), kmax)
    return k * POW2[POW2_OFFSET + s] + 0.0


@njit(parallel=True, cache=True)
def block_kernel(x, out, peak, inner, nblocks, wl, mode, key):
    """Pass 2: quantize against each block's shared exponent.

    Blocks whose max is zero get a step exponent of 0; every element of such
    a block is zero and quantizes to +0 regardless of the step.
    """
    kmax = float(2 ** (wl - 1) - 1)
    kmin = -float(2 ** (wl - 1))
    steps = np.zeros(nblocks, dtype=np.int64)
    for blk in range(nblocks):
        if peak[blk] != 0:
            steps[blk] = _floor_log2_bits(peak[blk]) - (wl - 2)
    if nblocks == 1:
        s = steps[0]
        if mode == STOCHASTIC:
            for i in prange(x.size):
                u = _variate(key, i)
                out[i] = _block_one(np.float64(x[i]), s, kmin, kmax, STOCHASTIC, u)
        elif mode == NEAREST_EVEN:
            for i in prange(x.size):
                out[i] = _block_one(np.float64(x[i]), s, kmin, kmax, NEAREST_EVEN, 0.0)
        elif mode == NEAREST_AWAY:
            for i in prange(x.size):
                out[i] = _block_one(np.float64(x[i]), s, kmin, kmax, NEAREST_AWAY, 0.0)
        else:
            for i in prange(x.size):
                out[i] = _block_one(np.float64(x[i]), s, kmin, kmax, NEAREST_ZERO, 0.0)
    else:
        for i in prange(x.size):
            s = steps[(i // inner) % nblocks]
            u = _variate(key, i) if mode == STOCHASTIC else 0.0
            out[i] = _block_one(np.float64(x[i]), s, kmin, kmax, mode, u)


@njit(parallel=True, cache=True)
def matmul_kernel(a, b, out):
    """out = a @ b with a float64 accumulator, summing over k in order."""
    m, kdim = a.shape
    n = b.shape[1]
    for i in prange(m):
        acc = np.zeros(n, dtype=np.float64)
        for p in range(kdim):
            aip = np.float64(a[i, p])
            for j in range(n):
                acc[j] += aip * np.float64(b[p, j])
        for j in range(n):
            out[i, j] = acc[j]
