"""Small parameter containers built on the tensor engine: Linear, PReLU, MLP."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Linear:
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, zero_init=False):
        if zero_init:
            w = np.zeros((d_in, d_out))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out))
        self.w = Tensor(w, track_grad=True)
        self.b = Tensor(np.zeros(d_out), track_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.affine(x, self.w, self.b)

    def params(self) -> list[Tensor]:
        return [self.w, self.b]

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class PReLU:
    def __init__(self, init_slope: float = 0.25):
        self.slope = Tensor(np.asarray(init_slope), track_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.prelu(x, self.slope)

    def params(self) -> list[Tensor]:
        return [self.slope]

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.slope": self.slope}


class MLP:
    """Affine stack with PReLU between layers and an optional terminal sigmoid.

    ``zero_init_last`` zeroes the output layer so an untrained network emits
    constant logits (uniform categoricals after softmax).
    """

    def __init__(self, dims: list[int], rng: np.random.Generator,
                 terminal: str | None = None, zero_init_last: bool = False):
        self.layers: list[Linear] = []
        self.acts: list[PReLU] = []
        n = len(dims) - 1
        for i in range(n):
            self.layers.append(Linear(dims[i], dims[i + 1], rng,
                                      zero_init=zero_init_last and i == n - 1))
            if i < n - 1:
                self.acts.append(PReLU())
        if terminal not in (None, "sigmoid"):
            raise ValueError(f"unknown terminal activation {terminal!r}")
        self.terminal = terminal

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.acts):
                x = self.acts[i](x)
        if self.terminal == "sigmoid":
            x = T.sigmoid(x)
        return x

    def params(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        for act in self.acts:
            out.extend(act.params())
        return out

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out.update(layer.named_params(f"{prefix}.fc{i}"))
        for i, act in enumerate(self.acts):
            out.update(act.named_params(f"{prefix}.act{i}"))
        return out


def snapshot(named: dict[str, Tensor]) -> dict[str, bytes]:
    """Byte images of parameter arrays, for freeze audits."""
    return {k: v.data.tobytes() for k, v in named.items()}
