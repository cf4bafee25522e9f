"""Network description, parameter containers, and composed forward/backward.

A model is a :class:`ModelConfig` (pure description, JSON-serializable)
plus a parameter list (one ``{name: ndarray}`` dict per layer, empty for
parameterless layers).  The layers themselves are the stateless
primitives from :mod:`cuneo.nn.layers`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from . import layers


@dataclass(frozen=True)
class ConvSpec:
    kind = "conv"
    filters: int
    kernel: int = 3


@dataclass(frozen=True)
class PoolSpec:
    kind = "pool"
    size: int = 2
    stride: int = 2


@dataclass(frozen=True)
class ReluSpec:
    kind = "relu"


@dataclass(frozen=True)
class FlattenSpec:
    kind = "flatten"


@dataclass(frozen=True)
class DenseSpec:
    kind = "dense"
    units: int


@dataclass(frozen=True)
class SoftmaxSpec:
    kind = "softmax"


LayerSpec = ConvSpec | PoolSpec | ReluSpec | FlattenSpec | DenseSpec | SoftmaxSpec


@dataclass(frozen=True)
class ModelConfig:
    input_shape: tuple[int, int, int]  # (channels, height, width)
    layers: tuple[LayerSpec, ...]
    num_classes: int
    seed: int = 0
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        layer_shapes(self)  # raises ConfigError on an inconsistent stack
        if self.class_names is not None and len(self.class_names) != self.num_classes:
            raise ConfigError(
                f"{len(self.class_names)} class names for {self.num_classes} classes"
            )


def layer_shapes(config: ModelConfig) -> list[tuple[int, ...]]:
    """Per-layer output shapes (excluding batch); validates the stack."""
    shape: tuple[int, ...] = tuple(config.input_shape)
    if len(shape) != 3 or any(d < 1 for d in shape):
        raise ConfigError(f"input_shape must be (channels, height, width) >= 1, got {shape}")
    if config.num_classes < 2:
        raise ConfigError("num_classes must be >= 2")
    if not config.layers:
        raise ConfigError("model has no layers")
    shapes = []
    for i, spec in enumerate(config.layers):
        where = f"layer {i} ({spec.kind})"
        if isinstance(spec, ConvSpec):
            if len(shape) != 3:
                raise ConfigError(f"{where}: conv needs a (C,H,W) input, got {shape}")
            c, h, w = shape
            if spec.filters < 1 or spec.kernel < 1:
                raise ConfigError(f"{where}: filters and kernel must be >= 1")
            if spec.kernel > h or spec.kernel > w:
                raise ConfigError(f"{where}: kernel {spec.kernel} exceeds input {h}x{w}")
            shape = (spec.filters, h - spec.kernel + 1, w - spec.kernel + 1)
        elif isinstance(spec, PoolSpec):
            if len(shape) != 3:
                raise ConfigError(f"{where}: pool needs a (C,H,W) input, got {shape}")
            c, h, w = shape
            if spec.size < 1 or spec.stride < 1:
                raise ConfigError(f"{where}: size and stride must be >= 1")
            if spec.size > h or spec.size > w:
                raise ConfigError(f"{where}: window {spec.size} exceeds input {h}x{w}")
            shape = (c, (h - spec.size) // spec.stride + 1, (w - spec.size) // spec.stride + 1)
        elif isinstance(spec, ReluSpec):
            pass
        elif isinstance(spec, FlattenSpec):
            shape = (int(np.prod(shape)),)
        elif isinstance(spec, DenseSpec):
            if len(shape) != 1:
                raise ConfigError(f"{where}: dense needs a flattened input, got {shape}")
            if spec.units < 1:
                raise ConfigError(f"{where}: units must be >= 1")
            shape = (spec.units,)
        elif isinstance(spec, SoftmaxSpec):
            if len(shape) != 1:
                raise ConfigError(f"{where}: softmax needs a flattened input, got {shape}")
            if i != len(config.layers) - 1:
                raise ConfigError(f"{where}: softmax must be the final layer")
        else:
            raise ConfigError(f"{where}: unknown layer spec {type(spec).__name__}")
        shapes.append(shape)
    if not isinstance(config.layers[-1], SoftmaxSpec):
        raise ConfigError("final layer must be softmax")
    if shapes[-1] != (config.num_classes,):
        raise ConfigError(
            f"network outputs {shapes[-1][0]} values but num_classes is {config.num_classes}"
        )
    return shapes


def default_model_config(
    num_classes: int,
    input_side: int = 64,
    seed: int = 0,
    class_names: tuple[str, ...] | None = None,
) -> ModelConfig:
    """The stock topology: two conv/relu/pool stages, then a 128-unit head."""
    return ModelConfig(
        input_shape=(1, input_side, input_side),
        layers=(
            ConvSpec(filters=16, kernel=3),
            ReluSpec(),
            PoolSpec(2, 2),
            ConvSpec(filters=32, kernel=3),
            ReluSpec(),
            PoolSpec(2, 2),
            FlattenSpec(),
            DenseSpec(units=128),
            ReluSpec(),
            DenseSpec(units=num_classes),
            SoftmaxSpec(),
        ),
        num_classes=num_classes,
        seed=seed,
        class_names=class_names,
    )


ModelParams = list  # list[dict[str, np.ndarray]], one dict per layer


def init_params(config: ModelConfig, dtype=np.float32) -> ModelParams:
    """Kaiming-uniform weights (bound sqrt(6/fan_in)), zero biases.

    Deterministic in ``config.seed``; a fixed draw order (layer by layer)
    keeps re-initialization reproducible.
    """
    rng = np.random.default_rng([config.seed])
    shapes = layer_shapes(config)
    params: ModelParams = []
    shape: tuple[int, ...] = tuple(config.input_shape)
    for spec, out_shape in zip(config.layers, shapes):
        if isinstance(spec, ConvSpec):
            c = shape[0]
            fan_in = c * spec.kernel * spec.kernel
            bound = float(np.sqrt(6.0 / fan_in))
            w = rng.uniform(-bound, bound, size=(spec.filters, c, spec.kernel, spec.kernel))
            params.append({"w": w.astype(dtype), "b": np.zeros(spec.filters, dtype=dtype)})
        elif isinstance(spec, DenseSpec):
            fan_in = shape[0]
            bound = float(np.sqrt(6.0 / fan_in))
            w = rng.uniform(-bound, bound, size=(fan_in, spec.units))
            params.append({"w": w.astype(dtype), "b": np.zeros(spec.units, dtype=dtype)})
        else:
            params.append({})
        shape = out_shape
    return params


def copy_params(params: ModelParams) -> ModelParams:
    return [{k: v.copy() for k, v in layer.items()} for layer in params]


def _as_model_input(x: np.ndarray, config: ModelConfig, dtype) -> np.ndarray:
    if x.ndim == 3:
        x = x[:, None, :, :]
    if x.ndim != 4 or x.shape[1:] != tuple(config.input_shape):
        raise ValueError(
            f"input shape {x.shape[1:]} does not match model input {tuple(config.input_shape)}"
        )
    return x.astype(dtype, copy=False)


def forward(config: ModelConfig, params: ModelParams, x: np.ndarray, keep_caches: bool = False):
    """Run the network; returns ``(probs, caches)``.

    ``x`` is ``(N, H, W)`` or ``(N, C, H, W)``; boolean ink masks are fine
    (they are cast to the parameter dtype, ink=1).
    """
    dtype = next(v.dtype for layer in params for v in layer.values())
    act = _as_model_input(np.asarray(x), config, dtype)
    caches = []
    for spec, layer_params in zip(config.layers, params):
        if isinstance(spec, ConvSpec):
            act, cache = layers.conv2d_forward(act, layer_params["w"], layer_params["b"])
        elif isinstance(spec, PoolSpec):
            act, cache = layers.maxpool_forward(act, spec.size, spec.stride)
        elif isinstance(spec, ReluSpec):
            act, cache = layers.relu_forward(act)
        elif isinstance(spec, FlattenSpec):
            act, cache = layers.flatten_forward(act)
        elif isinstance(spec, DenseSpec):
            act, cache = layers.dense_forward(act, layer_params["w"], layer_params["b"])
        else:
            act, cache = layers.softmax_forward(act)
        caches.append(cache if keep_caches else None)
    return act, caches


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class."""
    if probs.ndim != 2 or labels.ndim != 1 or probs.shape[0] != labels.shape[0]:
        raise ValueError(f"shape mismatch: probs {probs.shape}, labels {labels.shape}")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError("label out of range")
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, 1e-12)).mean())


def loss_and_grads(config: ModelConfig, params: ModelParams, x: np.ndarray, y: np.ndarray):
    """Cross-entropy loss and gradients for a batch.

    The softmax/cross-entropy pair is differentiated jointly: the
    gradient entering the last pre-softmax layer is ``(p - onehot)/N``,
    so the softmax layer itself is skipped on the way back.
    """
    probs, caches = forward(config, params, x, keep_caches=True)
    y = np.asarray(y)
    loss = cross_entropy(probs, y)
    n = probs.shape[0]
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads: ModelParams = [None] * len(params)
    upstream = delta.astype(probs.dtype)
    for i in range(len(config.layers) - 1, -1, -1):
        spec = config.layers[i]
        if isinstance(spec, SoftmaxSpec):
            grads[i] = {}
            continue  # folded into the cross-entropy delta above
        if isinstance(spec, ConvSpec):
            upstream, dw, db = layers.conv2d_backward(upstream, caches[i])
            grads[i] = {"w": dw, "b": db}
        elif isinstance(spec, PoolSpec):
            upstream = layers.maxpool_backward(upstream, caches[i])
            grads[i] = {}
        elif isinstance(spec, ReluSpec):
            upstream = layers.relu_backward(upstream, caches[i])
            grads[i] = {}
        elif isinstance(spec, FlattenSpec):
            upstream = layers.flatten_backward(upstream, caches[i])
            grads[i] = {}
        elif isinstance(spec, DenseSpec):
            upstream, dw, db = layers.dense_backward(upstream, caches[i])
            grads[i] = {"w": dw, "b": db}
    return loss, grads


def predict_probs(config: ModelConfig, params: ModelParams, x: np.ndarray,
                  batch_size: int = 256) -> np.ndarray:
    x = np.asarray(x)
    chunks = []
    for start in range(0, x.shape[0], batch_size):
        probs, _ = forward(config, params, x[start : start + batch_size])
        chunks.append(probs)
    return np.concatenate(chunks, axis=0)


def predict(config: ModelConfig, params: ModelParams, x: np.ndarray,
            batch_size: int = 256) -> np.ndarray:
    """Predicted class ids; ties resolve to the lowest id (argmax rule)."""
    return np.argmax(predict_probs(config, params, x, batch_size), axis=1)
