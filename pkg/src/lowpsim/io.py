"""File formats: binary tensors, format strings, JSON quantization configs.

Tensor files (``LPT1``)::

    b"LPT1" | rank: u32 LE | rank x extent: u64 LE | payload: f32 LE, row-major

Format strings are ``float:EXP:MAN``, ``fixed:WL:FL[:symmetric][:wrap]`` and
``block:WL[:tensor|:dim=D]``.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FormatError, LowpError
from .formats import BlockFloatFormat, FixedFormat, FloatFormat, NumberFormat, RoundingMode
from .quant import QuantSpec
from .tensor import Tensor
from .train import CATEGORIES, QuantConfig

MAGIC = b"LPT1"
MAX_RANK = 8


class TensorFileError(LowpError, ValueError):
    pass


class ConfigError(LowpError, ValueError):
    pass


def tensor_to_bytes(t: Tensor) -> bytes:
    if t.ndim > MAX_RANK:
        raise TensorFileError(f"rank {t.ndim} exceeds {MAX_RANK}")
    head = MAGIC + struct.pack("<I", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
    return head + t.data.astype("<f4").tobytes()


def tensor_from_bytes(buf: bytes) -> Tensor:
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise TensorFileError("not a tensor file (bad magic)")
    (rank,) = struct.unpack_from("<I", buf, 4)
    if rank > MAX_RANK:
        raise TensorFileError(f"rank {rank} exceeds {MAX_RANK}")
    head = 8 + 8 * rank
    if len(buf) < head:
        raise TensorFileError("truncated header")
    shape = struct.unpack_from(f"<{rank}Q", buf, 8)
    n = math.prod(shape)
    if len(buf) - head != 4 * n:
        raise TensorFileError(f"payload is {len(buf) - head} bytes, expected {4 * n} for shape {shape}")
    return Tensor(np.frombuffer(buf, dtype="<f4", offset=head, count=n), shape=shape)


def write_tensor(path, t: Tensor) -> None:
    Path(path).write_bytes(tensor_to_bytes(t))


def read_tensor(path) -> Tensor:
    return tensor_from_bytes(Path(path).read_bytes())


# -- format strings --------------------------------------------------------------


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{what} must be an integer, got {text!r}") from None


def parse_format(text: str) -> NumberFormat:
    parts = text.strip().split(":")
    kind, args = parts[0].lower(), parts[1:]
    if kind == "float":
        if len(args) != 2:
            raise FormatError("float format is float:EXP:MAN")
        return FloatFormat(_int(args[0], "exp"), _int(args[1], "man"))
    if kind == "fixed":
        if len(args) < 2:
            raise FormatError("fixed format is fixed:WL:FL[:symmetric][:wrap]")
        flags = set(args[2:])
        unknown = flags - {"symmetric", "wrap", "saturate"}
        if unknown:
            raise FormatError(f"unknown fixed-point flag(s): {', '.join(sorted(unknown))}")
        return FixedFormat(
            _int(args[0], "wl"), _int(args[1], "fl"), symmetric="symmetric" in flags, saturate="wrap" not in flags
        )
    if kind == "block":
        if len(args) not in (1, 2):
            raise FormatError("block format is block:WL[:tensor|:dim=D]")
        dim = None
        if len(args) == 2 and args[1] != "tensor":
            if not args[1].startswith("dim="):
                raise FormatError(f"bad block assignment {args[1]!r}")
            dim = _int(args[1][4:], "dim")
        return BlockFloatFormat(_int(args[0], "wl"), dim)
    raise FormatError(f"unknown format kind {kind!r} (expected float, fixed or block)")


# -- JSON config -----------------------------------------------------------------------


_FIELDS = {
    "float": {"kind", "exp", "man", "rounding", "seed"},
    "fixed": {"kind", "wl", "fl", "symmetric", "saturate", "rounding", "seed"},
    "block": {"kind", "wl", "block", "rounding", "seed"},
}


def format_to_json(fmt: NumberFormat) -> dict[str, Any]:
    if isinstance(fmt, FloatFormat):
        return {"kind": "float", "exp": fmt.exp_bits, "man": fmt.man_bits}
    if isinstance(fmt, FixedFormat):
        return {"kind": "fixed", "wl": fmt.wl, "fl": fmt.fl, "symmetric": fmt.symmetric, "saturate": fmt.saturate}
    return {"kind": "block", "wl": fmt.wl, "block": "tensor" if fmt.dim is None else {"dim": fmt.dim}}


def spec_to_json(spec: QuantSpec) -> dict[str, Any]:
    return {**format_to_json(spec.format), "rounding": spec.mode.value, "seed": spec.seed}


def config_to_json(cfg: QuantConfig) -> dict[str, Any]:
    return {name: spec_to_json(spec) for name, spec in cfg.items() if spec is not None}


def _spec_from_json(key: str, obj: Any) -> QuantSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{key}: expected an object")
    kind = obj.get("kind")
    if kind not in _FIELDS:
        raise ConfigError(f"{key}.kind: expected 'float', 'fixed' or 'block', got {kind!r}")
    extra = set(obj) - _FIELDS[kind]
    if extra:
        raise ConfigError(f"{key}: unknown key(s) {', '.join(sorted(extra))}")

    def need(name):
        if name not in obj:
            raise ConfigError(f"{key}.{name}: required for {kind} formats")
        return obj[name]

    try:
        if kind == "float":
            fmt = FloatFormat(need("exp"), need("man"))
        elif kind == "fixed":
            fmt = FixedFormat(need("wl"), need("fl"), obj.get("symmetric", False), obj.get("saturate", True))
        else:
            block = obj.get("block", "tensor")
            if block == "tensor":
                dim = None
            elif isinstance(block, dict) and set(block) == {"dim"}:
                dim = block["dim"]
            else:
                raise ConfigError(f"{key}.block: expected \"tensor\" or {{\"dim\": d}}")
            fmt = BlockFloatFormat(need("wl"), dim)
        mode = RoundingMode.parse(obj.get("rounding", "nearest_even"))
    except FormatError as e:
        raise ConfigError(f"{key}: {e}") from None
    seed = obj.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"{key}.seed: expected a non-negative integer")
    return QuantSpec(fmt, mode, seed)


def config_from_json(obj: Any) -> QuantConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(obj) - set(CATEGORIES)
    if extra:
        raise ConfigError(f"unknown key(s) {', '.join(sorted(extra))}; expected {', '.join(CATEGORIES)}")
    return QuantConfig(**{k: _spec_from_json(k, v) for k, v in obj.items()})


def load_config(path) -> QuantConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return config_from_json(obj)
