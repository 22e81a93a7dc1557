"""Adam optimizer and reduce-on-plateau learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from .layers import Parameter


@dataclass
class AdamState:
    """First/second-moment accumulators shaped like the parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update with bias correction; inputs are left untouched."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidInputError("params/grads/state lengths differ")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise InvalidInputError(
                f"shape mismatch in adam_step: {p.shape} vs {g.shape} vs {m.shape}")
    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        update = (lr / bc1) * m / (np.sqrt(v / bc2) + eps)
        new_params.append(p - update)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(m=new_m, v=new_v, t=t)


class Adam:
    """In-place Adam over Parameter objects, built on adam_step."""

    def __init__(self, params: list[Parameter], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.zeros_like([p.value for p in params])

    def step(self):
        values = [p.value for p in self.params]
        grads = [p.grad for p in self.params]
        new_values, self.state = adam_step(
            values, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)
        for p, nv in zip(self.params, new_values):
            p.value = nv


def reduce_lr_on_plateau(loss_history: list[float], current_lr: float,
                         patience: int = 50, factor: float = 0.5,
                         min_lr: float = 1e-4) -> float:
    """Learning rate after replaying the whole loss history from current_lr.

    An epoch improves when its loss is strictly below the best loss seen so
    far. After `patience` consecutive non-improving epochs the rate is
    multiplied by `factor` (floored at min_lr) and the patience counter
    resets. The rate never increases.
    """
    if not 0 < factor < 1:
        raise InvalidInputError(f"factor must be in (0,1), got {factor}")
    if min_lr <= 0 or patience < 1:
        raise InvalidInputError("min_lr must be positive and patience >= 1")
    sched = PlateauScheduler(current_lr, patience=patience, factor=factor, min_lr=min_lr)
    for loss in loss_history:
        sched.step(float(loss))
    return sched.lr


class PlateauScheduler:
    """Incremental form of reduce_lr_on_plateau (one step() per epoch)."""

    def __init__(self, lr: float, patience: int = 50, factor: float = 0.5,
                 min_lr: float = 1e-4):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.best = np.inf
        self.stale = 0

    def step(self, loss: float) -> float:
        if loss < self.best:
            self.best = loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.stale = 0
        return self.lr
