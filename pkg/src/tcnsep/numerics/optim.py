"""Adam and gradient-norm clipping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new arrays and a new state."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    m_prev = state.m or [np.zeros_like(p) for p in params]
    v_prev = state.v or [np.zeros_like(p) for p in params]
    t = state.step + 1
    new_params, new_m, new_v = [], [], []
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, m_prev, v_prev):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(t, new_m, new_v)


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    """Scale gradients so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(np.sum([np.sum(g * g) for g in grads])))
    if max_norm is None or total <= max_norm or total == 0.0:
        return list(grads), total
    scale = max_norm / total
    return [g * scale for g in grads], total


class Adam:
    """Stateful wrapper applying :func:`adam_step` to leaf tensors."""

    def __init__(self, params: Sequence[Tensor], lr: float, grad_clip: float | None = 5.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.grad_clip = grad_clip
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        grads = [p.grad for p in self.params]
        if self.grad_clip is not None:
            grads, norm = clip_grad_norm(grads, self.grad_clip)
        else:
            norm = float(np.sqrt(np.sum([np.sum(g * g) for g in grads])))
        new, self.state = adam_step(
            [p.data for p in self.params], grads, self.state, self.lr,
            self.betas[0], self.betas[1], self.eps,
        )
        for p, arr in zip(self.params, new):
            p.assign(arr)
        return norm
