"""Semantic encoders, task decoders, and the three stage losses.

Two-layer perceptrons with PReLU activations stand in for the large image
backbones; nothing downstream depends on the backbone choice. Encoders map
a source vector in [0,1]^k to a 2n-dim feature vector, classifiers map a
received 2n-dim (interleaved I/Q) signal to class logits, reconstructors
map it back to [0,1]^k through a terminal sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError
from .nn import MLP
from .tensor import Tensor


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.1
    beta: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "beta"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be nonnegative")


class Encoder:
    """k -> hidden -> 2n feature extractor."""

    def __init__(self, k: int, n: int, hidden: int, rng: np.random.Generator):
        self.k = k
        self.n = n
        self.net = MLP([k, hidden, 2 * n], rng)

    def __call__(self, x) -> Tensor:
        return _apply(self.net, x, self.k, "encoder")

    def params(self):
        return self.net.params()

    def named_params(self, prefix: str):
        return self.net.named_params(prefix)


class Classifier:
    """2n -> hidden -> L logits."""

    def __init__(self, n: int, num_classes: int, hidden: int, rng: np.random.Generator):
        self.n = n
        self.num_classes = num_classes
        self.net = MLP([2 * n, hidden, num_classes], rng)

    def __call__(self, z) -> Tensor:
        return _apply(self.net, z, 2 * self.n, "classifier")

    def params(self):
        return self.net.params()

    def named_params(self, prefix: str):
        return self.net.named_params(prefix)


class Reconstructor:
    """2n -> hidden -> k with terminal sigmoid, outputs in (0,1)."""

    def __init__(self, n: int, k: int, hidden: int, rng: np.random.Generator):
        self.n = n
        self.k = k
        self.net = MLP([2 * n, hidden, k], rng, terminal="sigmoid")

    def __call__(self, z) -> Tensor:
        return _apply(self.net, z, 2 * self.n, "reconstructor")

    def params(self):
        return self.net.params()

    def named_params(self, prefix: str):
        return self.net.named_params(prefix)


def _apply(net: MLP, x, d_in: int, name: str) -> Tensor:
    x = T.as_tensor(x)
    squeeze = x.data.ndim == 1
    if squeeze:
        x = T.reshape(x, (1, x.shape[0]))
    if x.data.ndim != 2 or x.shape[1] != d_in:
        raise ShapeError(f"{name} expects [*, {d_in}] input, got {x.shape}")
    out = net(x)
    if squeeze:
        out = T.reshape(out, (out.shape[1],))
    return out


def encode_basic(x, theta1: Encoder) -> Tensor:
    return theta1(x)


def encode_enhanced(x, theta2: Encoder) -> Tensor:
    return theta2(x)


def decode_class(z, psi: Classifier) -> Tensor:
    return psi(z)


def decode_recon(z, eta: Reconstructor) -> Tensor:
    return eta(z)


def loss_stage1(s1_logits: Tensor, s1: np.ndarray, x_hat: Tensor, x,
                w: LossWeights) -> Tensor:
    """Receiver-1 objective: classification CE plus lambda1 * reconstruction MSE."""
    ce = T.cross_entropy(_batched(s1_logits), np.atleast_1d(s1))
    if w.lambda1 == 0:
        return ce
    return T.add(ce, T.mul_scalar(T.mse(x_hat, T.as_tensor(x)), w.lambda1))


def loss_stage2(s2_logits: Tensor, s2: np.ndarray, x_hat2: Tensor, x,
                r: Tensor, w: LossWeights) -> Tensor:
    """Receiver-2 objective: CE + lambda2 * MSE + lambda3 * mean ||r||^2.

    The residual penalty is the empirical mean over the batch of the
    squared norm of each residual row.
    """
    out = T.cross_entropy(_batched(s2_logits), np.atleast_1d(s2))
    if w.lambda2 > 0:
        out = T.add(out, T.mul_scalar(T.mse(x_hat2, T.as_tensor(x)), w.lambda2))
    if w.lambda3 > 0:
        r = _batched(r)
        penalty = T.mul_scalar(T.sum_sq(r), 1.0 / r.shape[0])
        out = T.add(out, T.mul_scalar(penalty, w.lambda3))
    return out


def loss_stage3(l1: Tensor, l2: Tensor, beta: float) -> Tensor:
    """Joint fine-tuning objective l1 + beta * l2."""
    if beta < 0:
        raise ContractError(f"beta must be nonnegative, got {beta}")
    if beta == 0:
        return l1
    return T.add(l1, T.mul_scalar(l2, beta))


def _batched(t: Tensor) -> Tensor:
    t = T.as_tensor(t)
    if t.data.ndim == 1:
        return T.reshape(t, (1, t.shape[0]))
    return t
