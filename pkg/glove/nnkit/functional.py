from __future__ import annotations

import math
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor


def _same_padding(k: int) -> Tuple[int, int]:
    left = (k - 1) // 2
    return left, k - 1 - left


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    padding: Union[str, int] = "same",
) -> Tensor:
    """Stride-1 cross-correlation of (B, Cin, L) with (Cout, Cin, k) weights."""
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch("conv1d", f"x (B, {weight.shape[1]}, L) for weight {weight.shape}", x.shape)
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeMismatch("conv1d bias", (weight.shape[0],), bias.shape)
    k = weight.shape[2]
    if padding == "same":
        left, right = _same_padding(k)
    elif padding == "valid":
        left = right = 0
    else:
        left = right = int(padding)
    length = x.shape[2]
    if k > length + left + right:
        raise ShapeMismatch("conv1d kernel", f"<= {length + left + right}", k)

    padded = np.pad(x.data, ((0, 0), (0, 0), (left, right)))
    cols = np.lib.stride_tricks.sliding_window_view(padded, k, axis=2)
    out_len = cols.shape[2]
    out = np.einsum("bclk,ock->bol", cols, weight.data, optimize=True)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def backward(g: np.ndarray) -> None:
        if weight.requires_grad:
            weight.accumulate(np.einsum("bol,bclk->ock", g, cols, optimize=True))
        if bias is not None and bias.requires_grad:
            bias.accumulate(g.sum(axis=(0, 2)))
        if x.requires_grad:
            dcols = np.einsum("bol,ock->bclk", g, weight.data, optimize=True)
            dpadded = np.zeros_like(padded)
            for j in range(k):
                dpadded[:, :, j:j + out_len] += dcols[:, :, :, j]
            x.accumulate(dpadded[:, :, left:left + length])

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(out, parents, "conv1d", backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Dense layer: x @ W^T + b with W of shape (out, in)."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeMismatch("dense input", f"(..., {weight.shape[1]})", x.shape)
    out = x @ weight.transpose()
    return out + bias if bias is not None else out


def relu(x: Tensor) -> Tensor:
    return x.relu()


def max_pool1d(x: Tensor, kernel: int = 2) -> Tensor:
    """Non-overlapping max over the last axis; a trailing partial window is dropped."""
    length = x.shape[-1]
    out_len = length // kernel
    if out_len == 0:
        raise ShapeMismatch("max_pool1d length", f">= {kernel}", length)
    lead = x.shape[:-1]
    view = x.data[..., : out_len * kernel].reshape(*lead, out_len, kernel)
    arg = view.argmax(axis=-1)[..., None]
    out = np.take_along_axis(view, arg, axis=-1)[..., 0]

    def backward(g: np.ndarray) -> None:
        grad_view = np.zeros_like(view)
        np.put_along_axis(grad_view, arg, g[..., None], axis=-1)
        full = np.zeros_like(x.data)
        full[..., : out_len * kernel] = grad_view.reshape(*lead, out_len * kernel)
        x.accumulate(full)

    return Tensor._result(out, (x,), "max_pool1d", backward)


def adaptive_avg_pool1d(x: Tensor, output_size: int = 1) -> Tensor:
    if output_size != 1:
        raise ShapeMismatch("adaptive_avg_pool1d output size", 1, output_size)
    return x.mean(axis=-1, keepdims=True)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization of (B, C) or (B, C, L); running stats are updated in place."""
    if x.ndim not in (2, 3) or x.shape[1] != gamma.shape[0]:
        raise ShapeMismatch("batch_norm", f"(B, {gamma.shape[0]}[, L])", x.shape)
    axes = (0,) if x.ndim == 2 else (0, 2)
    shape = (1, -1) if x.ndim == 2 else (1, -1, 1)
    if training:
        count = int(np.prod([x.shape[a] for a in axes]))
        if count < 2:
            raise ShapeMismatch("batch_norm in training mode", "more than one value per channel", x.shape)
        mean = x.mean(axis=axes, keepdims=True)
        centered = x - mean
        var = (centered * centered).mean(axis=axes, keepdims=True)
        normalized = centered / (var + eps).sqrt()
        unbiased = var.data.reshape(-1) * count / (count - 1)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean.data.reshape(-1)
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        normalized = (x - running_mean.reshape(shape)) / np.sqrt(running_var.reshape(shape) + eps)
    return normalized * gamma.reshape(shape) + beta.reshape(shape)


def layer_norm(x: Tensor, gamma: Optional[Tensor], beta: Optional[Tensor], eps: float = 1e-5) -> Tensor:
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    normalized = centered / (var + eps).sqrt()
    if gamma is not None:
        normalized = normalized * gamma
    if beta is not None:
        normalized = normalized + beta
    return normalized


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: kept units are scaled by 1/(1-p) so eval mode is the identity."""
    if not training or p == 0.0:
        return x
    if p >= 1.0:
        return x * 0.0
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x - x.data.max(axis=axis, keepdims=True)
    return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    e = (x - x.data.max(axis=axis, keepdims=True)).exp()
    return e / e.sum(axis=axis, keepdims=True)


def _check_targets(logits: Tensor, targets: np.ndarray) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeMismatch("loss targets", (logits.shape[0],), targets.shape)
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise ShapeMismatch("loss targets", f"indices in 0..{logits.shape[1] - 1}")
    return targets


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    targets = _check_targets(logits, targets)
    logp = log_softmax(logits, axis=1)
    return -logp[np.arange(len(targets)), targets].mean()


LOG_CLAMP = math.log(1e-12)


def focal_loss(logits: Tensor, targets: np.ndarray, alpha: float = 1.0, gamma: float = 2.0) -> Tensor:
    """Mean of -alpha (1 - p_t)^gamma log p_t; log p_t is clamped at log(1e-12)."""
    targets = _check_targets(logits, targets)
    logp_t = log_softmax(logits, axis=1)[np.arange(len(targets)), targets]
    log_term = logp_t.clip(low=LOG_CLAMP)
    if gamma == 0:
        return -(log_term * alpha).mean()
    modulator = (1.0 - logp_t.exp()) ** gamma
    return -(modulator * log_term * alpha).mean()


__all__ = [
    "conv1d",
    "linear",
    "relu",
    "max_pool1d",
    "adaptive_avg_pool1d",
    "batch_norm",
    "layer_norm",
    "dropout",
    "log_softmax",
    "softmax",
    "cross_entropy",
    "focal_loss",
    "LOG_CLAMP",
]
