"""Low-precision training of small MLPs.

Five categories of numbers are quantized independently:

* activation: ``ActivationQuant`` layers in the forward pass;
* error: ``ErrorQuant`` layers, which quantize the backpropagated signal
  just before it enters a ``Linear`` layer's backward computation;
* gradient, accumulator and weight: inside :class:`LowPrecisionOptimizer`,
  which keeps a master copy of the weights at accumulator precision.

Matrix products and the loss run in full precision.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import InjectionError, ShapeError, StaleCacheError
from .formats import IDENTITY_FORMAT, RoundingMode
from .quant import QuantSpec, quantize
from .rng import MASK64, mix64
from .tensor import Tensor

CATEGORIES = ("weight", "accumulator", "gradient", "activation", "error")


@dataclass
class QuantConfig:
    weight: QuantSpec | None = None
    accumulator: QuantSpec | None = None
    gradient: QuantSpec | None = None
    activation: QuantSpec | None = None
    error: QuantSpec | None = None

    @classmethod
    def uniform(cls, spec: QuantSpec) -> QuantConfig:
        """Same format and rounding everywhere; seeds differ per category."""
        return cls(**{c: spec.copy(seed=spec.seed + i) for i, c in enumerate(CATEGORIES)})

    @classmethod
    def identity(cls) -> QuantConfig:
        return cls.uniform(QuantSpec(IDENTITY_FORMAT, RoundingMode.NEAREST_EVEN))

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


# -- layers --------------------------------------------------------------------


@dataclass(eq=False)
class Linear:
    weight: Tensor  # out x in
    bias: Tensor  # out

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"Linear: weight {self.weight.shape} and bias {self.bias.shape} disagree")


@dataclass(eq=False)
class ReLU:
    pass


@dataclass(eq=False)
class ActivationQuant:
    """Quantizes in the forward pass, straight-through in the backward pass."""

    spec: QuantSpec | None = None


@dataclass(eq=False)
class ErrorQuant:
    """Identity in the forward pass, quantizes the error signal going backward."""

    spec: QuantSpec | None = None


Layer = Linear | ReLU | ActivationQuant | ErrorQuant


@dataclass(eq=False)
class Model:
    layers: list
    version: int = 0

    def linears(self) -> list[Linear]:
        return [l for l in self.layers if isinstance(l, Linear)]

    def parameters(self) -> list[Tensor]:
        out = []
        for l in self.linears():
            out += [l.weight, l.bias]
        return out

    def set_parameters(self, params: Sequence[Tensor]) -> None:
        lins = self.linears()
        if len(params) != 2 * len(lins):
            raise ShapeError(f"expected {2 * len(lins)} parameter tensors, got {len(params)}")
        for l, w, b in zip(lins, params[0::2], params[1::2]):
            if w.shape != l.weight.shape or b.shape != l.bias.shape:
                raise ShapeError("parameter shape mismatch")
            l.weight, l.bias = w, b
        self.version += 1

    @property
    def injected(self) -> bool:
        return any(isinstance(l, (ActivationQuant, ErrorQuant)) for l in self.layers)


def mlp(sizes: Sequence[int], seed: int = 0) -> Model:
    """Linear/ReLU stack with He-normal weights and zero biases."""
    rng = np.random.default_rng(seed)
    layers: list = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = rng.standard_normal((n_out, n_in)) * math.sqrt(2.0 / n_in)
        layers.append(Linear(Tensor(w), Tensor(np.zeros(n_out))))
        if i < len(sizes) - 2:
            layers.append(ReLU())
    return Model(layers)


# -- forward / backward ----------------------------------------------------------


@dataclass
class Cache:
    model: Model
    version: int
    inputs: list  # input to each layer, in layer order


def forward(model: Model, x: Tensor) -> tuple[Tensor, Cache]:
    inputs = []
    for layer in model.layers:
        inputs.append(x)
        if isinstance(layer, Linear):
            if x.ndim != 2 or x.shape[1] != layer.weight.shape[1]:
                raise ShapeError(f"Linear expects {layer.weight.shape[1]} features, got shape {x.shape}")
            x = T.add_bias(T.matmul(x, T.transpose(layer.weight)), layer.bias)
        elif isinstance(layer, ReLU):
            x = T.relu(x)
        elif isinstance(layer, ActivationQuant):
            x = quantize(x, layer.spec)
    return x, Cache(model, model.version, inputs)


def backward(model: Model, cache: Cache, loss_grad: Tensor, signals: list | None = None) -> list[Tensor]:
    """Gradients for ``model.parameters()``, unquantized.

    If ``signals`` is a list, every error tensor leaving an ``ErrorQuant``
    layer is appended to it as ``(layer_index, tensor)``.
    """
    if cache.model is not model or cache.version != model.version:
        raise StaleCacheError("cache does not belong to the current model state")
    g = loss_grad
    grads: list[tuple[Tensor, Tensor]] = []
    for idx in range(len(model.layers) - 1, -1, -1):
        layer, x = model.layers[idx], cache.inputs[idx]
        if isinstance(layer, Linear):
            if g.shape != (x.shape[0], layer.weight.shape[0]):
                raise ShapeError(f"backward signal {g.shape} does not match layer output")
            grads.append((T.matmul(T.transpose(g), x), T.sum_rows(g)))
            g = T.matmul(g, layer.weight)
        elif isinstance(layer, ReLU):
            g = T.relu_backward(g, x)
        elif isinstance(layer, ErrorQuant):
            g = quantize(g, layer.spec)
            if signals is not None:
                signals.append((idx, g))
    out = []
    for dw, db in reversed(grads):
        out += [dw, db]
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> tuple[float, Tensor]:
    """Mean cross-entropy and its gradient w.r.t. the logits (full precision)."""
    labels = np.asarray(labels)
    n = logits.shape[0]
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(n), labels].mean())
    p = T.softmax_rows(logits).numpy()
    p[np.arange(n), labels] -= 1.0
    return loss, Tensor(p / n)


# -- quantizer injection -----------------------------------------------------------


def _layer_spec(spec: QuantSpec | None, salt: int) -> QuantSpec | None:
    if spec is None:
        return None
    return spec.copy(seed=mix64(mix64(spec.seed) ^ salt) & MASK64, call_counter=0)


def inject_quantizers(model: Model, cfg: QuantConfig) -> Model:
    """Return a model with an ErrorQuant and an ActivationQuant per Linear block.

    Layout per block: ``Linear, ErrorQuant, [ReLU], ActivationQuant``.  Layers
    are shared with ``model``, so training the result trains ``model``.
    Absent categories still get a (no-op) quantizer layer.
    """
    if model.injected:
        raise InjectionError("model already contains quantizer layers")
    layers: list = []
    block = 0
    i = 0
    while i < len(model.layers):
        layer = model.layers[i]
        layers.append(layer)
        if isinstance(layer, Linear):
            block += 1
            layers.append(ErrorQuant(_layer_spec(cfg.error, 2 * block)))
            if i + 1 < len(model.layers) and isinstance(model.layers[i + 1], ReLU):
                layers.append(model.layers[i + 1])
                i += 1
            layers.append(ActivationQuant(_layer_spec(cfg.activation, 2 * block + 1)))
        i += 1
    return Model(layers, model.version)


# -- optimizer ------------------------------------------------------------------------


class LowPrecisionOptimizer:
    """SGD with momentum over a master weight copy held at accumulator precision.

    Per step, for each parameter::

        g   = Q_gradient(grad)
        v   = Q_accumulator(momentum * v + g)     (only if momentum > 0)
        acc = Q_accumulator(acc - lr * v)
        w   = Q_weight(acc)

    With every spec absent this is plain SGD with momentum.
    """

    def __init__(
        self,
        model: Model,
        lr: float,
        momentum: float = 0.0,
        weight: QuantSpec | None = None,
        gradient: QuantSpec | None = None,
        accumulator: QuantSpec | None = None,
    ):
        if not lr >= 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        self.model = model
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.specs = {
            "weight": copy.copy(weight),
            "gradient": copy.copy(gradient),
            "accumulator": copy.copy(accumulator),
        }
        self.accumulator_copy = [quantize(p, self.specs["accumulator"]) for p in model.parameters()]
        self.velocity = [T.zeros(p.shape) for p in self.accumulator_copy]
        self.last_gradients: list[Tensor] = []
        model.set_parameters([quantize(a, self.specs["weight"]) for a in self.accumulator_copy])

    @classmethod
    def from_config(cls, model: Model, cfg: QuantConfig, lr: float, momentum: float = 0.0):
        return cls(model, lr, momentum, cfg.weight, cfg.gradient, cfg.accumulator)

    def step(self, grads: Sequence[Tensor]) -> list[Tensor]:
        if len(grads) != len(self.accumulator_copy):
            raise ShapeError(f"expected {len(self.accumulator_copy)} gradients, got {len(grads)}")
        q_w, q_g, q_acc = (self.specs[k] for k in ("weight", "gradient", "accumulator"))
        live = []
        self.last_gradients = []
        for i, g in enumerate(grads):
            if g.shape != self.accumulator_copy[i].shape:
                raise ShapeError(f"gradient {i} has shape {g.shape}, expected {self.accumulator_copy[i].shape}")
            g = quantize(g, q_g)
            self.last_gradients.append(g)
            if self.momentum > 0.0:
                self.velocity[i] = quantize(T.add(T.scale(self.velocity[i], self.momentum), g), q_acc)
                update = self.velocity[i]
            else:
                update = g
            self.accumulator_copy[i] = quantize(T.sub(self.accumulator_copy[i], T.scale(update, self.lr)), q_acc)
            live.append(quantize(self.accumulator_copy[i], q_w))
        self.model.set_parameters(live)
        return live


# -- data and the training loop -----------------------------------------------------------


@dataclass
class Dataset:
    x: Tensor
    y: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]


def make_separable(n: int = 512, dim: int = 8, margin: float = 0.5, seed: int = 0) -> Dataset:
    """Two Gaussian classes split by a random hyperplane with a guaranteed gap.

    Points are labelled by the side of the hyperplane they fall on and then
    pushed ``margin`` further away from it, so a linear classifier reaches
    100% accuracy.
    """
    rng = np.random.default_rng(seed)
    normal = rng.standard_normal(dim)
    normal /= np.linalg.norm(normal)
    x = rng.standard_normal((n, dim))
    side = x @ normal
    y = (side > 0).astype(np.int64)
    x += np.where(y == 1, margin, -margin)[:, None] * normal
    return Dataset(Tensor(x), y)


def make_moons(n: int = 512, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaving half circles in 2-D."""
    rng = np.random.default_rng(seed)
    n0 = n // 2
    t0 = rng.uniform(0, math.pi, n0)
    t1 = rng.uniform(0, math.pi, n - n0)
    x = np.concatenate(
        [np.stack([np.cos(t0), np.sin(t0)], 1), np.stack([1 - np.cos(t1), 0.5 - np.sin(t1)], 1)]
    )
    x += noise * rng.standard_normal(x.shape)
    y = np.concatenate([np.zeros(n0, np.int64), np.ones(n - n0, np.int64)])
    return Dataset(Tensor(x), y)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


def accuracy(model: Model, data: Dataset) -> float:
    out, _ = forward(model, data.x)
    return float((out.data.argmax(axis=1) == data.y).mean())


def train(
    model: Model,
    data: Dataset,
    cfg: QuantConfig | None = None,
    epochs: int = 30,
    lr: float = 0.05,
    momentum: float = 0.9,
    seed: int = 0,
    batch_size: int = 32,
) -> list[EpochStats]:
    """Minibatch training; updates ``model`` in place and returns per-epoch stats.

    The config is copied, so its counters are not advanced and repeated calls
    with identical arguments give identical traces.
    """
    if epochs <= 0:
        return []
    cfg = copy.deepcopy(cfg) if cfg is not None else QuantConfig()
    net = inject_quantizers(model, cfg)
    opt = LowPrecisionOptimizer.from_config(net, cfg, lr, momentum)
    rng = np.random.default_rng(seed)
    n = len(data)
    trace = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            out, cache = forward(net, Tensor._wrap(data.x.data[idx], check=False))
            loss, g = softmax_cross_entropy(out, data.y[idx])
            opt.step(backward(net, cache, g))
            total += loss * len(idx)
        trace.append(EpochStats(epoch + 1, total / n, accuracy(net, data)))
    model.version = net.version
    return trace
