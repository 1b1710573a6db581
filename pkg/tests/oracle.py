"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import numpy as np

from lowpsim.formats import RoundingMode


def nearest_in_set(values: np.ndarray, xs: np.ndarray, mode: RoundingMode) -> np.ndarray:
    """Closest member of the sorted set ``values`` to each x, ties broken per mode.

    For a tie between neighbours lo < hi the "even" one is the one that is an
    even multiple of the gap hi - lo; this matches the last-bit-zero rule for
    every grid in use (fixed step, float binade, block step, underflow pair).
    """
    xs = np.asarray(xs, dtype=np.float64)
    idx = np.searchsorted(values, xs, side="left")
    hi = values[np.clip(idx, 0, len(values) - 1)]
    lo = values[np.clip(idx - 1, 0, len(values) - 1)]
    dlo, dhi = xs - lo, hi - xs
    out = np.where(dlo < dhi, lo, hi)
    tie = (dlo == dhi) & (lo != hi)
    if tie.any():
        l, h = lo[tie], hi[tie]
        if mode is RoundingMode.NEAREST_EVEN:
            pick_lo = np.mod(np.round(l / (h - l)), 2) == 0
        elif mode is RoundingMode.NEAREST_AWAY:
            pick_lo = h <= 0
        else:
            pick_lo = l >= 0
        out[tie] = np.where(pick_lo, l, h)
    out = np.where(idx == 0, values[0], out)
    out = np.where(idx == len(values), values[-1], out)
    return out


def brute_nearest(values, x, mode):
    """O(n) scan version of ``nearest_in_set`` for a single x."""
    d = [abs(x - v) for v in values]
    best = min(d)
    cands = [v for v, dv in zip(values, d) if dv == best]
    if len(cands) == 1:
        return cands[0]
    lo, hi = cands
    if mode is RoundingMode.NEAREST_EVEN:
        return lo if round(lo / (hi - lo)) % 2 == 0 else hi
    if mode is RoundingMode.NEAREST_AWAY:
        return lo if abs(lo) > abs(hi) else hi
    return lo if abs(lo) < abs(hi) else hi


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float32)
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += float(a[i, p]) * float(b[p, j])
            out[i, j] = s
    return out


def midpoints(values: np.ndarray) -> np.ndarray:
    return ((values[:-1] + values[1:]) / 2).astype(np.float32).astype(np.float64)


def random_inputs(rng: np.random.Generator, values: np.ndarray, n: int) -> np.ndarray:
    """float32 inputs spanning the set: uniform, log-uniform, exact midpoints, members."""
    span = max(abs(values[0]), abs(values[-1]))
    nonzero = np.abs(values[values != 0])
    tiny = nonzero.min()
    q = n // 4
    uni = rng.uniform(-1.5 * span, 1.5 * span, q)
    logu = np.exp2(rng.uniform(np.log2(tiny) - 3, np.log2(span) + 2, q)) * rng.choice([-1, 1], q)
    mids = rng.choice(midpoints(values), q)
    members = rng.choice(values, n - 3 * q)
    return np.concatenate([uni, logu, mids, members]).astype(np.float32)
