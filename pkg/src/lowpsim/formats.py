"""Number formats and rounding modes.

Every format describes a finite lattice of values that can be held exactly in
IEEE-754 single precision.  Quantizers map a float32 value onto that lattice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

from .errors import FormatError

# Largest and smallest binary exponents of normal float32 values.
F32_EMAX = 127
F32_EMIN = -126
# Exponent of the smallest float32 subnormal.
F32_ETINY = -149


class RoundingMode(enum.Enum):
    STOCHASTIC = "stochastic"
    NEAREST_EVEN = "nearest_even"
    NEAREST_AWAY = "nearest_away"
    NEAREST_ZERO = "nearest_zero"

    @property
    def code(self) -> int:
        """Small integer used by the compiled kernels."""
        return _MODE_CODES[self]

    @property
    def is_stochastic(self) -> bool:
        return self is RoundingMode.STOCHASTIC

    @classmethod
    def parse(cls, name: str | RoundingMode) -> RoundingMode:
        if isinstance(name, RoundingMode):
            return name
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise FormatError(f"unknown rounding mode {name!r} (expected one of {valid})") from None


_MODE_CODES = {
    RoundingMode.STOCHASTIC: 0,
    RoundingMode.NEAREST_EVEN: 1,
    RoundingMode.NEAREST_AWAY: 2,
    RoundingMode.NEAREST_ZERO: 3,
}

NEAREST_MODES = (RoundingMode.NEAREST_EVEN, RoundingMode.NEAREST_AWAY, RoundingMode.NEAREST_ZERO)


def _check_int(name: str, value, lo: int | None = None, hi: int | None = None) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"{name} must be an integer, got {value!r}")
    if lo is not None and value < lo:
        raise FormatError(f"{name}={value} is below the minimum {lo}")
    if hi is not None and value > hi:
        raise FormatError(f"{name}={value} exceeds the maximum {hi}")


@dataclass(frozen=True)
class FloatFormat:
    """Low-width floating point without subnormals, NaN or Inf.

    Exponent code 0 encodes zero only; every other code, including all-ones,
    encodes a normal binade.  With 8 exponent bits the top binade would lie
    beyond float32 range, so the largest exponent is capped at 127.
    """

    exp_bits: int
    man_bits: int

    def __post_init__(self):
        _check_int("exp_bits", self.exp_bits, 1, 8)
        _check_int("man_bits", self.man_bits, 0, 23)

    @property
    def bias(self) -> int:
        return 2 ** (self.exp_bits - 1) - 1

    @property
    def e_min(self) -> int:
        return 1 - self.bias

    @property
    def e_max(self) -> int:
        return min(2**self.exp_bits - 1 - self.bias, F32_EMAX)

    @property
    def max_value(self) -> float:
        return (2.0 - 2.0 ** -self.man_bits) * 2.0**self.e_max

    @property
    def min_normal(self) -> float:
        return 2.0**self.e_min

    def __str__(self) -> str:
        return f"float:{self.exp_bits}:{self.man_bits}"


@dataclass(frozen=True)
class FixedFormat:
    """Two's-complement fixed point: integers k in [k_min, k_max] times 2**-fl.

    ``symmetric`` drops the most negative code.  Without ``saturate``,
    out-of-range integers wrap modulo 2**wl.
    """

    wl: int
    fl: int
    symmetric: bool = False
    saturate: bool = True

    def __post_init__(self):
        _check_int("wl", self.wl, 2, 24)
        _check_int("fl", self.fl)
        # every code times the step must be an exact float32 value
        if self.fl > -F32_ETINY:
            raise FormatError(f"fl={self.fl} puts the step below the smallest float32 ({-F32_ETINY} max)")
        if self.wl - 1 - self.fl > F32_EMAX:
            raise FormatError(
                f"wl={self.wl}, fl={self.fl} exceeds float32 range (need wl - 1 - fl <= {F32_EMAX})"
            )
        for name in ("symmetric", "saturate"):
            if not isinstance(getattr(self, name), bool):
                raise FormatError(f"{name} must be a boolean")

    @property
    def step(self) -> float:
        return 2.0 ** -self.fl

    @property
    def k_max(self) -> int:
        return 2 ** (self.wl - 1) - 1

    @property
    def k_min(self) -> int:
        return -self.k_max if self.symmetric else -(2 ** (self.wl - 1))

    def __str__(self) -> str:
        s = f"fixed:{self.wl}:{self.fl}"
        if self.symmetric:
            s += ":symmetric"
        if not self.saturate:
            s += ":wrap"
        return s


@dataclass(frozen=True)
class BlockFloatFormat:
    """Block floating point: one shared exponent per block, wl-bit signed mantissas.

    ``dim=None`` treats the whole tensor as one block.  ``dim=d`` gives every
    index along dimension d its own exponent, shared across all other
    dimensions (so for a matrix, ``dim=0`` means one exponent per row).
    """

    wl: int
    dim: int | None = None

    def __post_init__(self):
        _check_int("wl", self.wl, 2, 24)
        if self.dim is not None:
            _check_int("dim", self.dim, 0)

    @property
    def k_max(self) -> int:
        return 2 ** (self.wl - 1) - 1

    @property
    def k_min(self) -> int:
        return -(2 ** (self.wl - 1))

    def step_exponent(self, block_exponent: int) -> int:
        """Exponent of the block step for a block whose max lies in [2**e, 2**(e+1))."""
        return block_exponent - (self.wl - 2)

    def __str__(self) -> str:
        return f"block:{self.wl}" + ("" if self.dim is None else f":dim={self.dim}")


NumberFormat = Union[FloatFormat, FixedFormat, BlockFloatFormat]

IDENTITY_FORMAT = FloatFormat(8, 23)
