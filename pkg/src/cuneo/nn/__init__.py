"""From-scratch convolutional network: layers, model, training, model files."""

from .layers import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    flatten_backward,
    flatten_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    softmax_backward,
    softmax_forward,
)
from .model import (
    ConvSpec,
    DenseSpec,
    FlattenSpec,
    LayerSpec,
    ModelConfig,
    ModelParams,
    PoolSpec,
    ReluSpec,
    SoftmaxSpec,
    copy_params,
    cross_entropy,
    default_model_config,
    forward,
    init_params,
    layer_shapes,
    loss_and_grads,
    predict,
    predict_probs,
)
from .serialize import load_model, save_model
from .training import (
    GRADCHECK_KINDS,
    AdamState,
    EpochStats,
    GradCheckEntry,
    GradCheckReport,
    TrainConfig,
    TrainLog,
    adam_step,
    gradient_check,
    train,
)

__all__ = [
    "AdamState",
    "ConvSpec",
    "DenseSpec",
    "EpochStats",
    "FlattenSpec",
    "GRADCHECK_KINDS",
    "GradCheckEntry",
    "GradCheckReport",
    "LayerSpec",
    "ModelConfig",
    "ModelParams",
    "PoolSpec",
    "ReluSpec",
    "SoftmaxSpec",
    "TrainConfig",
    "TrainLog",
    "adam_step",
    "conv2d_backward",
    "conv2d_forward",
    "copy_params",
    "cross_entropy",
    "default_model_config",
    "dense_backward",
    "dense_forward",
    "flatten_backward",
    "flatten_forward",
    "forward",
    "gradient_check",
    "init_params",
    "layer_shapes",
    "load_model",
    "loss_and_grads",
    "maxpool_backward",
    "maxpool_forward",
    "predict",
    "predict_probs",
    "relu_backward",
    "relu_forward",
    "save_model",
    "softmax_backward",
    "softmax_forward",
    "train",
]
