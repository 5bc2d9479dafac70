"""Probabilistic modulation of feature vectors onto QAM symbols.

A feature vector of length 2n is mapped by a small MLP to n*2*sqrt(M)
logits: one categorical over the sqrt(M) amplitude levels per channel use
and per I/Q axis (the per-sequence distribution factorizes over these 2n
categoricals). Symbols are drawn with the Gumbel-Softmax relaxation so the
sampling step stays differentiable; hard mode discretizes the forward pass
through a straight-through estimator. Sampled sequences are then rescaled
to satisfy the average transmit power constraint exactly per sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .constellation import Constellation
from .errors import ContractError, ShapeError
from .nn import MLP
from .tensor import Tensor


@dataclass(frozen=True)
class GumbelConfig:
    temperature: float = 1.0
    hard: bool = False


@dataclass
class SymbolDistribution:
    """Categorical probabilities of shape [..., n, 2, sqrt(M)]."""

    probs: Tensor

    @property
    def num_levels(self) -> int:
        return self.probs.shape[-1]


class Modulator:
    """MLP mapping a 2n-dim feature vector to per-axis level categoricals.

    The output layer is zero-initialized, so an untrained modulator emits
    uniform distributions over the amplitude levels.
    """

    def __init__(self, n: int, constellation: Constellation, hidden: int,
                 rng: np.random.Generator):
        self.n = n
        self.constellation = constellation
        k = len(constellation.levels)
        self.num_levels = k
        self.net = MLP([2 * n, hidden, n * 2 * k], rng, zero_init_last=True)

    def symbol_logits(self, u: Tensor) -> SymbolDistribution:
        """Per-dimension categorical probabilities for feature batch ``u``."""
        u = T.as_tensor(u)
        squeeze = u.data.ndim == 1
        if squeeze:
            u = T.reshape(u, (1, u.shape[0]))
        if u.data.ndim != 2 or u.shape[1] != 2 * self.n:
            raise ShapeError(f"modulator expects [*, {2 * self.n}] features, got {u.shape}")
        raw = self.net(u)
        shape = (u.shape[0], self.n, 2, self.num_levels)
        probs = T.softmax_last(T.reshape(raw, shape))
        if squeeze:
            probs = T.reshape(probs, shape[1:])
        return SymbolDistribution(probs=probs)

    def params(self):
        return self.net.params()

    def named_params(self, prefix: str):
        return self.net.named_params(prefix)


def sample_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(size=shape)
    return -np.log(-np.log(u + 1e-20) + 1e-20)


def gumbel_softmax_with_noise(dist: SymbolDistribution, noise: np.ndarray,
                              cfg: GumbelConfig) -> Tensor:
    """Relaxed one-hots from fixed Gumbel noise (separated out for gradient checks)."""
    if cfg.temperature <= 0:
        raise ContractError(f"gumbel temperature must be positive, got {cfg.temperature}")
    if noise.shape != dist.probs.shape:
        raise ShapeError(f"noise shape {noise.shape} != probs shape {dist.probs.shape}")
    logp = T.log(_safe_log_input(T.as_tensor(dist.probs)))
    z = T.mul_scalar(T.add(logp, Tensor(noise)), 1.0 / cfg.temperature)
    y = T.softmax_last(z)
    if cfg.hard:
        y = T.straight_through_onehot(y)
    return y


def _safe_log_input(probs: Tensor) -> Tensor:
    # clamp away exact zeros while keeping the graph (gradient of the clamp
    # region is irrelevant: those categories carry no probability mass)
    if probs.data.min() > 0:
        return probs
    eps = Tensor(np.where(probs.data > 0, 0.0, 1e-300))
    return T.add(probs, eps)


def gumbel_softmax_sample(dist: SymbolDistribution, cfg: GumbelConfig,
                          rng: np.random.Generator) -> Tensor:
    """Draw relaxed (or straight-through hard) one-hots for every categorical."""
    noise = sample_gumbel(dist.probs.shape, rng)
    return gumbel_softmax_with_noise(dist, noise, cfg)


def symbol_components(onehots: Tensor, c: Constellation) -> Tensor:
    """Contract (relaxed) one-hots [..., n, 2, K] with the level vector.

    Returns the interleaved real I/Q layout [..., 2n] (I0, Q0, I1, Q1, ...).
    """
    onehots = T.as_tensor(onehots)
    k = len(c.levels)
    if onehots.shape[-1] != k:
        raise ShapeError(f"one-hot depth {onehots.shape[-1]} != {k} levels")
    if onehots.data.ndim < 3 or onehots.shape[-2] != 2:
        raise ShapeError(f"expected [..., n, 2, {k}] one-hots, got {onehots.shape}")
    lead = onehots.shape[:-3]
    n = onehots.shape[-3]
    rows = int(np.prod(lead, dtype=int)) * n * 2 if lead else n * 2
    comps = T.matmul(T.reshape(onehots, (rows, k)), Tensor(c.levels[:, None]))
    return T.reshape(comps, lead + (2 * n,))


def components_to_complex(comps: np.ndarray) -> np.ndarray:
    """Interleaved [..., 2n] reals -> complex sequence [..., n]."""
    pairs = comps.reshape(comps.shape[:-1] + (-1, 2))
    return pairs[..., 0] + 1j * pairs[..., 1]


def complex_to_components(y: np.ndarray) -> np.ndarray:
    """Complex sequence [..., n] -> interleaved [..., 2n] reals."""
    out = np.empty(y.shape[:-1] + (2 * y.shape[-1],))
    out[..., 0::2] = y.real
    out[..., 1::2] = y.imag
    return out


def map_to_symbols(onehots, c: Constellation) -> np.ndarray:
    """(Relaxed) one-hots [..., n, 2, K] -> complex symbol sequence [..., n]."""
    comps = symbol_components(T.as_tensor(onehots), c)
    return components_to_complex(comps.data)


def normalize_power_t(y: Tensor, p: float, n: int) -> Tensor:
    """Scale each row of the [B, 2n] component layout to ||y||^2 / n == p."""
    y = T.as_tensor(y)
    if y.data.ndim != 2 or y.shape[1] != 2 * n:
        raise ShapeError(f"expected [B, {2 * n}] components, got {y.shape}")
    q = T.row_sumsq(y)
    if np.any(q.data <= 0):
        raise ContractError("cannot normalize an all-zero symbol sequence")
    scale = T.mul_scalar(T.pow_const(q, -0.5), np.sqrt(n * p))
    return T.scale_rows(y, scale)


def normalize_power(y: np.ndarray, p: float) -> np.ndarray:
    """Per-sequence power normalization of a complex sequence (or batch)."""
    y = np.asarray(y)
    n = y.shape[-1]
    q = np.sum(np.abs(y) ** 2, axis=-1, keepdims=True)
    if np.any(q <= 0):
        raise ContractError("cannot normalize an all-zero symbol sequence")
    return y * np.sqrt(n * p / q)


def expected_power_scale_t(dist: SymbolDistribution, c: Constellation,
                           p: float, n: int) -> Tensor:
    """Per-sequence scale factor from the distribution's expected power.

    Alternative to hard per-sequence normalization: scales by
    sqrt(n*p / E||y||^2), so the ensemble meets the power constraint while
    individual sequences may deviate (used for shaping studies).
    """
    probs = dist.probs
    if probs.data.ndim != 4:
        raise ShapeError(f"expected batched [B, n, 2, K] probs, got {probs.shape}")
    b = probs.shape[0]
    k = probs.shape[-1]
    flat = T.reshape(probs, (b * n * 2, k))
    per_dim = T.matmul(flat, Tensor((c.levels**2)[:, None]))
    e_norm = T.matmul(T.reshape(per_dim, (b, 2 * n)), Tensor(np.ones((2 * n, 1))))
    scale = T.mul_scalar(T.pow_const(T.reshape(e_norm, (b,)), -0.5), np.sqrt(n * p))
    return scale
