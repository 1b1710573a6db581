"""Element-by-element tensor quantization built on the scalar reference."""

import numpy as np

from lowpsim import BlockFloatFormat, quantize_scalar_block, quantize_scalar_fixed, quantize_scalar_float
from lowpsim.formats import FixedFormat
from lowpsim.rng import uniform_variate


def reference_quantize(x: np.ndarray, fmt, mode, seed=0, call=0) -> np.ndarray:
    flat = np.asarray(x, dtype=np.float32).reshape(-1)
    us = [uniform_variate(seed, call, i) for i in range(flat.size)] if mode.is_stochastic else [None] * flat.size
    out = np.empty(flat.size, dtype=np.float64)
    if isinstance(fmt, BlockFloatFormat):
        idx = np.arange(flat.size).reshape(x.shape)
        groups = [idx.reshape(-1)] if fmt.dim is None else [np.take(idx, j, axis=fmt.dim).reshape(-1) for j in range(x.shape[fmt.dim])]
        for g in groups:
            if g.size:
                out[g] = quantize_scalar_block(flat[g].tolist(), fmt, mode, [us[i] for i in g])
    else:
        one = quantize_scalar_fixed if isinstance(fmt, FixedFormat) else quantize_scalar_float
        for i, v in enumerate(flat.tolist()):
            out[i] = one(v, fmt, mode, us[i])
    return out.astype(np.float32).reshape(x.shape)
