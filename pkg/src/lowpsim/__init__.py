"""Low-precision arithmetic simulation in single-precision storage."""

from .errors import (
    EquivalenceError,
    FormatError,
    InjectionError,
    InvalidInputError,
    LowpError,
    ShapeError,
    StaleCacheError,
    TooLargeError,
    UnsupportedFormatError,
)
from .formats import BlockFloatFormat, FixedFormat, FloatFormat, NumberFormat, RoundingMode
from .quant import QuantSpec, quantize, quantize_composed, quantize_fused, quantized_op
from .rng import RngStream, uniform_variate
from .scalar import (
    enumerate_representable,
    quantize_scalar,
    quantize_scalar_block,
    quantize_scalar_fixed,
    quantize_scalar_float,
    round_integer,
)
from .tensor import Tensor
from .train import (
    LowPrecisionOptimizer,
    Model,
    QuantConfig,
    backward,
    forward,
    inject_quantizers,
    mlp,
    train,
)

__version__ = "0.1.0"
