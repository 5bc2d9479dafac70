"""Adam with bias correction and a cosine-annealing-warm-restarts schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError
from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter moment estimates and step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: np.ndarray, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param),
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float):
    """One in-place Adam update of ``param``; increments ``state.t``."""
    if lr <= 0:
        raise ContractError(f"adam_step: lr must be positive, got {lr}")
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeError(f"adam_step: shape mismatch {param.shape}/{grad.shape}/{state.m.shape}")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Adam over a fixed list of tracked tensors, consuming their ``.grad``."""

    def __init__(self, params: list[Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.states = [AdamState.for_param(p.data, beta1, beta2, eps) for p in self.params]

    def step(self, lr: float):
        for p, st in zip(self.params, self.states):
            if p.grad is None:
                continue
            adam_step(p.data, p.grad, st, lr)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


@dataclass
class LrSchedule:
    """Cosine annealing with warm restarts; cycle lengths t0, t0*t_mult, ..."""

    eta_max: float
    eta_min: float = 1e-5
    t0: int = 10
    t_mult: int = 2


def lr_at(epoch: float, schedule: LrSchedule) -> float:
    """Learning rate at ``epoch`` (restart epochs return eta_max exactly)."""
    if epoch < 0:
        raise ContractError(f"lr_at: epoch must be >= 0, got {epoch}")
    if schedule.t0 <= 0 or schedule.t_mult < 1:
        raise ContractError("lr_at: schedule needs t0 > 0 and t_mult >= 1")
    t_cur = float(epoch)
    period = float(schedule.t0)
    while t_cur >= period:
        t_cur -= period
        period *= schedule.t_mult
    frac = 0.5 * (1.0 + math.cos(math.pi * t_cur / period))
    return schedule.eta_min + (schedule.eta_max - schedule.eta_min) * frac
