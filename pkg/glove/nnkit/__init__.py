"""Small reverse-mode autodiff toolkit: tensors, layers, losses and optimizers."""
from . import functional
from .gradcheck import grad_check, numerical_grad, relative_error
from .layers import (
    AdaptiveAvgPool1d,
    BatchNorm1d,
    Conv1d,
    Dropout,
    LayerNorm,
    Linear,
    MaxPool1d,
    Module,
    Parameter,
    ReLU,
    Sequential,
)
from .optim import (
    Adam,
    AdamState,
    AdamW,
    CosineWarmRestarts,
    adamw_step,
    clip_grad_norm,
    clip_gradients,
    lr_at,
    optimizer_for,
)
from .tensor import Tensor, concat, no_grad, tensor

__all__ = [
    "functional",
    "Tensor",
    "tensor",
    "concat",
    "no_grad",
    "Parameter",
    "Module",
    "Linear",
    "Conv1d",
    "BatchNorm1d",
    "LayerNorm",
    "Dropout",
    "ReLU",
    "MaxPool1d",
    "AdaptiveAvgPool1d",
    "Sequential",
    "AdamState",
    "adamw_step",
    "AdamW",
    "Adam",
    "lr_at",
    "CosineWarmRestarts",
    "clip_gradients",
    "clip_grad_norm",
    "optimizer_for",
    "grad_check",
    "numerical_grad",
    "relative_error",
]
