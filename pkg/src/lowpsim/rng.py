"""Counter-based uniform variates.

The variate for element ``index`` of quantization call ``call`` is a pure
function of ``(seed, call, index)``: three rounds of the splitmix64 finalizer,
top 53 bits scaled into [0, 1).  No state is carried between draws, so any
evaluation order (or thread count) yields the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB
INV_2_53 = 2.0**-53


def mix64(z: int) -> int:
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MUL2) & MASK64
    return z ^ (z >> 31)


def call_key(seed: int, call: int) -> int:
    """Per-call key; the element index is mixed in last."""
    return mix64(mix64(seed & MASK64) ^ (call & MASK64))


def uniform_variate(stream: RngStream | int, call: int, index: int) -> float:
    seed = stream.seed if isinstance(stream, RngStream) else stream
    h = mix64(call_key(seed, call) ^ (index & MASK64))
    return (h >> 11) * INV_2_53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MUL2)
    return z ^ (z >> np.uint64(31))


def uniform_variates(seed: int, call: int, n: int, start: int = 0) -> np.ndarray:
    """Variates for indices ``start .. start + n - 1`` as a float64 array."""
    idx = np.arange(start, start + n, dtype=np.uint64)
    h = _mix64_array(idx ^ np.uint64(call_key(seed, call)))
    return (h >> np.uint64(11)).astype(np.float64) * INV_2_53


@dataclass(frozen=True)
class RngStream:
    seed: int

    def variate(self, call: int, index: int) -> float:
        return uniform_variate(self, call, index)

    def variates(self, call: int, n: int) -> np.ndarray:
        return uniform_variates(self.seed, call, n)
