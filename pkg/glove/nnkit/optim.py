from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..config import AdamWParams, CosineRestartSchedule
from .layers import Parameter


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], t=0)


def adamw_step(
    params: Sequence[np.ndarray],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamState,
    hp: AdamWParams,
    lr: Optional[float] = None,
    decoupled: bool = True,
) -> AdamState:
    """One Adam update in place on ``params``.

    ``decoupled`` applies ``theta -= lr * wd * theta`` before the moment update
    (AdamW); otherwise ``wd * theta`` is folded into the gradient (classic L2).
    """
    lr = hp.lr if lr is None else lr
    state.t += 1
    bias1 = 1.0 - hp.beta1**state.t
    bias2 = 1.0 - hp.beta2**state.t
    for i, (theta, grad) in enumerate(zip(params, grads)):
        g = np.zeros_like(theta) if grad is None else grad
        if hp.weight_decay:
            if decoupled:
                theta -= lr * hp.weight_decay * theta
            else:
                g = g + hp.weight_decay * theta
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g
        m_hat = state.m[i] / bias1
        v_hat = state.v[i] / bias2
        theta -= lr * m_hat / (np.sqrt(v_hat) + hp.eps)
    return state


class AdamW:
    decoupled = True

    def __init__(self, params: Sequence[Parameter], hp: Optional[AdamWParams] = None):
        self.params = list(params)
        self.hp = hp or AdamWParams()
        self.lr = self.hp.lr
        self.state = AdamState.zeros_like([p.data for p in self.params])

    def step(self) -> None:
        adamw_step(
            [p.data for p in self.params],
            [p.grad for p in self.params],
            self.state,
            self.hp,
            lr=self.lr,
            decoupled=self.decoupled,
        )

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


class Adam(AdamW):
    """Adam with L2 penalty added to the gradient."""

    decoupled = False


def lr_at(schedule: CosineRestartSchedule, epoch: float, lr_max: float) -> float:
    """Cosine annealing with warm restarts; cycle i has length T0 * Tmult**i."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    start, length = 0.0, float(schedule.T0)
    while epoch >= start + length:
        start += length
        length *= schedule.Tmult
    progress = (epoch - start) / length
    return schedule.eta_min + (lr_max - schedule.eta_min) * (1.0 + math.cos(math.pi * progress)) / 2.0


class CosineWarmRestarts:
    """Per-epoch scheduler driving an optimizer's ``lr``."""

    def __init__(self, optimizer: AdamW, schedule: Optional[CosineRestartSchedule] = None):
        self.optimizer = optimizer
        self.schedule = schedule or CosineRestartSchedule()
        self.lr_max = optimizer.hp.lr
        self.epoch = 0
        optimizer.lr = lr_at(self.schedule, 0, self.lr_max)

    def step(self) -> float:
        self.epoch += 1
        self.optimizer.lr = lr_at(self.schedule, self.epoch, self.lr_max)
        return self.optimizer.lr


def global_norm(grads: Sequence[Optional[np.ndarray]]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads if g is not None))


def clip_gradients(
    grads: Sequence[Optional[np.ndarray]], max_norm: float = 1.0
) -> List[Optional[np.ndarray]]:
    """Scale every gradient by max_norm / norm when the global L2 norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm <= max_norm:
        return list(grads)
    scale = max_norm / norm
    return [None if g is None else g * scale for g in grads]


def clip_grad_norm(params: Sequence[Parameter], max_norm: float = 1.0) -> float:
    grads = [p.grad for p in params]
    norm = global_norm(grads)
    for param, clipped in zip(params, clip_gradients(grads, max_norm)):
        param.grad = clipped
    return norm


def optimizer_for(kind: str, params: Sequence[Parameter], hp: AdamWParams) -> AdamW:
    return AdamW(params, hp) if kind == "adamw" else Adam(params, hp)


__all__ = [
    "AdamState",
    "adamw_step",
    "AdamW",
    "Adam",
    "lr_at",
    "CosineWarmRestarts",
    "global_norm",
    "clip_gradients",
    "clip_grad_norm",
    "optimizer_for",
]
