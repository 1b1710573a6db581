"""Minimal dense tensor and the full-precision operations built on it.

A :class:`Tensor` is an immutable, row-major, contiguous buffer of float32
(or, for intermediate work in the composed quantizers, float64) values.
There is no broadcasting, no strided view and no autograd.  Every operation
makes exactly one pass over its data and allocates its own result; the
module-level pass counter records this so callers can assert pass counts.
"""

from __future__ import annotations

import contextlib
import math
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidInputError, ShapeError
from .formats import NEAREST_MODES, RoundingMode
from .rng import uniform_variates

FLOAT32 = np.dtype(np.float32)
FLOAT64 = np.dtype(np.float64)

_validate = True


class PassCounter:
    def __init__(self):
        self.passes = 0
        self.ops: list[str] = []

    def record(self, name: str, n: int = 1) -> None:
        self.passes += n
        self.ops.extend([name] * n)


_counters: list[PassCounter] = []


def record_pass(name: str, n: int = 1) -> None:
    """Register ``n`` full data passes with every active counter."""
    for c in _counters:
        c.record(name, n)


@contextlib.contextmanager
def count_passes() -> Iterator[PassCounter]:
    c = PassCounter()
    _counters.append(c)
    try:
        yield c
    finally:
        _counters.remove(c)


@contextlib.contextmanager
def validation(enabled: bool) -> Iterator[None]:
    """Toggle finiteness checks on operation results (construction always checks)."""
    global _validate
    prev, _validate = _validate, enabled
    try:
        yield
    finally:
        _validate = prev


def validation_enabled() -> bool:
    return _validate


class Tensor:
    __slots__ = ("_a",)

    def __init__(self, data, shape: Sequence[int] | None = None, dtype=np.float32):
        dtype = np.dtype(dtype)
        if dtype not in (FLOAT32, FLOAT64):
            raise TypeError(f"unsupported dtype {dtype}")
        a = np.array(data, dtype=dtype, order="C", copy=True)
        if shape is not None:
            shape = tuple(int(s) for s in shape)
            if any(s < 0 for s in shape):
                raise ShapeError(f"negative extent in {shape}")
            if a.size != math.prod(shape):
                raise ShapeError(f"{a.size} values do not fill shape {shape}")
            a = a.reshape(shape)
        if not np.isfinite(a).all():
            raise InvalidInputError("tensor contains non-finite values")
        a.flags.writeable = False
        self._a = a

    @classmethod
    def _wrap(cls, a: np.ndarray, check: bool = True) -> Tensor:
        if check and _validate and not np.isfinite(a).all():
            raise InvalidInputError("operation produced non-finite values")
        t = object.__new__(cls)
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        t._a = a
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self._a.shape

    @property
    def ndim(self) -> int:
        return self._a.ndim

    @property
    def size(self) -> int:
        return self._a.size

    @property
    def dtype(self) -> np.dtype:
        return self._a.dtype

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the underlying buffer."""
        return self._a

    def numpy(self) -> np.ndarray:
        return self._a.copy()

    def tolist(self):
        return self._a.tolist()

    def item(self) -> float:
        return self._a.item()

    def bits(self) -> np.ndarray:
        return self._a.view(np.uint32 if self.dtype == FLOAT32 else np.uint64)

    def bit_equal(self, other: Tensor) -> bool:
        return (
            self.shape == other.shape
            and self.dtype == other.dtype
            and np.array_equal(self.bits(), other.bits())
        )

    def reshape(self, shape: Sequence[int]) -> Tensor:
        shape = tuple(shape)
        if math.prod(shape) != self.size:
            raise ShapeError(f"cannot reshape {self.shape} to {shape}")
        return Tensor._wrap(self._a.reshape(shape), check=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, data={self._a.tolist()!r})"

    def __len__(self) -> int:
        return self.shape[0]


def zeros(shape: Sequence[int], dtype=np.float32) -> Tensor:
    return Tensor._wrap(np.zeros(tuple(shape), dtype=dtype), check=False)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _binary(name: str, fn, a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, name)
    record_pass(name)
    return Tensor._wrap(fn(a._a, b._a))


# -- full-precision arithmetic ------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = np.empty((a.shape[0], b.shape[1]), dtype=np.result_type(a.dtype, b.dtype))
    _kernels.matmul_kernel(a._a, b._a, out)
    record_pass("matmul")
    return Tensor._wrap(out)


def transpose(t: Tensor) -> Tensor:
    if t.ndim != 2:
        raise ShapeError("transpose needs a matrix")
    record_pass("transpose")
    return Tensor._wrap(t._a.T.copy(), check=False)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary("add", np.add, a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary("sub", np.subtract, a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary("mul", np.multiply, a, b)


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "div")
    if _validate and not b._a.all():
        raise InvalidInputError("division by zero")
    record_pass("div")
    with np.errstate(divide="ignore", invalid="ignore"):
        return Tensor._wrap(a._a / b._a)


def scale(t: Tensor, s: float) -> Tensor:
    record_pass("scale")
    return Tensor._wrap(t._a * t.dtype.type(s))


def add_scalar(t: Tensor, s: float) -> Tensor:
    record_pass("add_scalar")
    return Tensor._wrap(t._a + t.dtype.type(s))


def relu(t: Tensor) -> Tensor:
    record_pass("relu")
    return Tensor._wrap(np.maximum(t._a, t.dtype.type(0)), check=False)


def relu_backward(grad: Tensor, x: Tensor) -> Tensor:
    """Pass ``grad`` where ``x > 0``, zero elsewhere."""
    _same_shape(grad, x, "relu_backward")
    record_pass("relu_backward")
    return Tensor._wrap(np.where(x._a > 0, grad._a, grad.dtype.type(0)), check=False)


def abs_(t: Tensor) -> Tensor:
    record_pass("abs")
    return Tensor._wrap(np.abs(t._a), check=False)


def add_bias(t: Tensor, bias: Tensor) -> Tensor:
    """Add a length-n vector to every row of an m x n matrix."""
    if t.ndim != 2 or bias.shape != (t.shape[1],):
        raise ShapeError(f"add_bias: {bias.shape} does not match rows of {t.shape}")
    record_pass("add_bias")
    return Tensor._wrap(t._a + bias._a)


def sum_rows(t: Tensor) -> Tensor:
    """Column sums of a matrix, accumulated in order in float64."""
    if t.ndim != 2:
        raise ShapeError("sum_rows needs a matrix")
    acc = np.zeros(t.shape[1], dtype=np.float64)
    for row in t._a:
        acc += row
    record_pass("sum_rows")
    return Tensor._wrap(acc.astype(t.dtype))


def softmax_rows(t: Tensor) -> Tensor:
    """Row-wise softmax, max-shifted, evaluated in float64."""
    if t.ndim != 2:
        raise ShapeError("softmax_rows needs a matrix")
    z = t._a.astype(np.float64)
    z = np.exp(z - z.max(axis=1, keepdims=True))
    record_pass("softmax_rows")
    return Tensor._wrap((z / z.sum(axis=1, keepdims=True)).astype(t.dtype))


# -- building blocks for the composed quantizers -------------------------------


def widen(t: Tensor) -> Tensor:
    record_pass("widen")
    return Tensor._wrap(t._a.astype(np.float64), check=False)


def narrow(t: Tensor) -> Tensor:
    record_pass("narrow")
    with np.errstate(over="ignore"):
        return Tensor._wrap(t._a.astype(np.float32))


def exponent(t: Tensor) -> Tensor:
    """floor(log2|x|) elementwise via frexp (exact); zero maps to -1."""
    record_pass("exponent")
    return Tensor._wrap((np.frexp(t._a)[1] - 1).astype(t.dtype), check=False)


def exp2(t: Tensor) -> Tensor:
    record_pass("exp2")
    return Tensor._wrap(np.ldexp(t.dtype.type(1), t._a.astype(np.int64)).astype(t.dtype))


def round_nearest(t: Tensor, mode: RoundingMode) -> Tensor:
    """Round to integers; ties resolved per ``mode``.  Zero results are +0."""
    mode = RoundingMode.parse(mode)
    if mode not in NEAREST_MODES:
        raise ValueError("round_nearest needs a nearest mode")
    a = t._a
    record_pass("round")
    if mode is RoundingMode.NEAREST_EVEN:
        out = np.rint(a)
    else:
        f = np.floor(a)
        d = a - f
        tie_up = (a > 0) if mode is RoundingMode.NEAREST_AWAY else (a < 0)
        out = np.where((d > 0.5) | ((d == 0.5) & tie_up), f + 1, f)
    return Tensor._wrap(out + 0.0, check=False)


def round_stochastic(t: Tensor, u: Tensor) -> Tensor:
    """floor(x) + 1 where ``u`` is below the fractional part."""
    _same_shape(t, u, "round_stochastic")
    f = np.floor(t._a)
    record_pass("round")
    return Tensor._wrap(np.where(u._a < t._a - f, f + 1, f) + 0.0, check=False)


def clamp(t: Tensor, lo: float, hi: float) -> Tensor:
    record_pass("clamp")
    return Tensor._wrap(np.clip(t._a, lo, hi), check=False)


def wrap(t: Tensor, lo: float, modulus: float) -> Tensor:
    """Reduce integers into [lo, lo + modulus) modulo ``modulus``."""
    record_pass("wrap")
    return Tensor._wrap(np.mod(t._a - lo, modulus) + lo, check=False)


def expand_along(values: Tensor, shape: Sequence[int], dim: int | None) -> Tensor:
    """Tile per-block values to full shape: ``out[..., i_dim, ...] = values[i_dim]``."""
    shape = tuple(shape)
    record_pass("expand")
    if dim is None:
        if values.size != 1:
            raise ShapeError("whole-tensor expansion needs a single value")
        return Tensor._wrap(np.full(shape, values._a.reshape(()), dtype=values.dtype), check=False)
    _check_dim(dim, len(shape))
    if values.shape != (shape[dim],):
        raise ShapeError(f"expand_along: {values.shape} does not match dim {dim} of {shape}")
    view = [1] * len(shape)
    view[dim] = shape[dim]
    return Tensor._wrap(np.broadcast_to(values._a.reshape(view), shape).copy(), check=False)


def uniform(shape: Sequence[int], seed: int, call: int) -> Tensor:
    """Counter-based variates indexed by flat element position."""
    shape = tuple(shape)
    record_pass("uniform")
    return Tensor._wrap(uniform_variates(seed, call, math.prod(shape)).reshape(shape), check=False)


def _check_dim(dim: int, ndim: int) -> None:
    if isinstance(dim, bool) or not isinstance(dim, int) or not 0 <= dim < ndim:
        raise ShapeError(f"dimension {dim!r} is invalid for a rank-{ndim} tensor")


def reduce_max_abs(t: Tensor, dim: int | None = None) -> Tensor:
    """Max |x| over the whole tensor (shape ``(1,)``) or per index along ``dim``."""
    a = t._a
    record_pass("reduce_max_abs")
    if dim is None:
        return Tensor._wrap(np.array([np.abs(a).max() if a.size else 0.0], dtype=t.dtype), check=False)
    _check_dim(dim, t.ndim)
    other = tuple(i for i in range(t.ndim) if i != dim)
    if a.size == 0:
        return zeros((t.shape[dim],), t.dtype)
    return Tensor._wrap(np.abs(a).max(axis=other) if other else np.abs(a), check=False)
